#![no_main]

use dnn_accel::prune::{pack_row, row_addresses, unpack_stream};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((head, rest)) = data.split_first_chunk::<2>() else {
        return;
    };
    let nnz = u16::from_le_bytes(*head) as usize;
    let words: Vec<u64> = rest
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let Ok(row) = unpack_stream(&words, nnz) else {
        return;
    };
    assert_eq!(row.nnz(), nnz);
    let packed = pack_row(&row).unwrap();
    assert_eq!(unpack_stream(&packed, nnz).unwrap(), row);
    if let Ok(addrs) = row_addresses(&row, row.span()) {
        assert!(addrs.windows(2).all(|w| w[0] < w[1]));
    }
});
