//! 64-bit word packing of sparse-row tuples.
//!
//! Each word holds three 21-bit tuples, first tuple in the least-significant
//! bits. Tuple `i` occupies bits `21i ..= 21i+15` (Q7.8 weight raw) and
//! `21i+16 ..= 21i+20` (zero-run). Bit 63 is always clear. Slots past the
//! row's tuple count in its last word are zero and ignored on decode.

use super::{PruneError, SparseRow, Tuple, MAX_ZERO_RUN};
use crate::fxp::Q7_8;

pub const TUPLES_PER_WORD: usize = 3;
const TUPLE_BITS: u32 = 21;
const WEIGHT_MASK: u64 = 0xFFFF;
const ZEROS_MASK: u64 = 0x1F;
const PAD_BIT: u64 = 1 << 63;

/// Storage inflation per weight when `r` weights of `b_weight` bits share one
/// 64-bit word.
pub fn overhead_factor(tuples_per_word: u32, weight_bits: u32) -> f64 {
    64.0 / (tuples_per_word as f64 * weight_bits as f64)
}

pub fn pack_row(row: &SparseRow) -> Result<Vec<u64>, PruneError> {
    if let Some((index, t)) = row.tuples.iter().enumerate().find(|(_, t)| t.zeros > MAX_ZERO_RUN) {
        return Err(PruneError::ZeroRunOverflow { index, zeros: t.zeros });
    }
    Ok(row
        .tuples
        .chunks(TUPLES_PER_WORD)
        .map(|chunk| {
            chunk.iter().enumerate().fold(0u64, |word, (i, t)| {
                let field = (t.weight.raw() as u16 as u64) | ((t.zeros as u64) << 16);
                word | (field << (TUPLE_BITS * i as u32))
            })
        })
        .collect())
}

pub fn unpack_stream(words: &[u64], nnz: usize) -> Result<SparseRow, PruneError> {
    let expected = nnz.div_ceil(TUPLES_PER_WORD);
    if words.len() != expected {
        return Err(PruneError::WordCountMismatch {
            expected,
            found: words.len(),
        });
    }
    if let Some(index) = words.iter().position(|w| w & PAD_BIT != 0) {
        return Err(PruneError::BadPadBit { index });
    }
    let tuples = words
        .iter()
        .flat_map(|&word| {
            (0..TUPLES_PER_WORD).map(move |i| {
                let field = word >> (TUPLE_BITS * i as u32);
                Tuple {
                    weight: Q7_8::from_raw((field & WEIGHT_MASK) as u16 as i16),
                    zeros: ((field >> 16) & ZEROS_MASK) as u8,
                }
            })
        })
        .take(nnz)
        .collect();
    Ok(SparseRow { tuples })
}

/// Input index of every stored tuple, computed word by word the way the
/// offset-calculation stage does: within a word,
/// `address_i = o_reg + i + Σ_{k≤i} z_k`, and after the word `o_reg` becomes
/// the last address plus one.
pub fn row_addresses(row: &SparseRow, input_width: usize) -> Result<Vec<usize>, PruneError> {
    let mut addresses = Vec::with_capacity(row.nnz());
    let mut o_reg = 0usize;
    for word in row.tuples.chunks(TUPLES_PER_WORD) {
        let mut zero_sum = 0usize;
        let mut last = o_reg;
        for (i, t) in word.iter().enumerate() {
            zero_sum += t.zeros as usize;
            let address = o_reg + i + zero_sum;
            if address >= input_width {
                return Err(PruneError::AddressOutOfRange {
                    address,
                    width: input_width,
                });
            }
            addresses.push(address);
            last = address;
        }
        o_reg = last + 1;
    }
    Ok(addresses)
}
