//! NNSP sparse stream file: one pruned weight matrix.
//!
//! ```text
//! "NNSP" | version u8 = 1 | row_count u32 LE | input_width u32 LE
//! per row: nnz u32 LE | ceil(nnz / 3) packed words, u64 LE
//! ```

use std::path::Path;

use super::{pack_row, unpack_stream, PruneError, PrunedLayer, SparseRow, TUPLES_PER_WORD};
use crate::model::ActivationKind;

pub const MAGIC: &[u8; 4] = b"NNSP";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 13;

pub fn encode(layer: &PrunedLayer) -> Result<Vec<u8>, PruneError> {
    let to_u32 = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| PruneError::MalformedStream(format!("{what} {n} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * layer.row_count() + 8 * layer.word_count());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&to_u32(layer.row_count(), "row count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(layer.input_width(), "input width")?.to_le_bytes());
    for row in layer.rows() {
        out.extend_from_slice(&to_u32(row.nnz(), "tuple count")?.to_le_bytes());
        for word in pack_row(row)? {
            out.extend_from_slice(&word.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses an NNSP image. The activation is not part of the stream and is
/// supplied by the caller.
pub fn decode(bytes: &[u8], activation: ActivationKind) -> Result<PrunedLayer, PruneError> {
    let truncated = |what: &str| PruneError::MalformedStream(format!("truncated while reading {what}"));
    let header = bytes.get(..HEADER_LEN).ok_or_else(|| truncated("header"))?;
    if &header[..4] != MAGIC {
        return Err(PruneError::MalformedStream("bad magic, expected \"NNSP\"".into()));
    }
    if header[4] != VERSION {
        return Err(PruneError::UnsupportedVersion(header[4]));
    }
    let u32_at = |b: &[u8], at: usize| u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]]) as usize;
    let row_count = u32_at(header, 5);
    let input_width = u32_at(header, 9);

    let mut rest = &bytes[HEADER_LEN..];
    // every row needs at least its 4-byte count
    if row_count > rest.len() / 4 {
        return Err(truncated("row table"));
    }
    let mut rows = Vec::with_capacity(row_count);
    for _ in 0..row_count {
        let nnz_bytes = rest.get(..4).ok_or_else(|| truncated("tuple count"))?;
        let nnz = u32_at(nnz_bytes, 0);
        rest = &rest[4..];
        let n_words = nnz.div_ceil(TUPLES_PER_WORD);
        if n_words > rest.len() / 8 {
            return Err(truncated("packed words"));
        }
        let words: Vec<u64> = rest[..n_words * 8]
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        rest = &rest[n_words * 8..];
        rows.push(unpack_stream(&words, nnz)?);
    }
    if !rest.is_empty() {
        return Err(PruneError::MalformedStream(format!("{} trailing bytes", rest.len())));
    }
    PrunedLayer::from_rows(rows, input_width, activation)
}

pub fn save(layer: &PrunedLayer, path: impl AsRef<Path>) -> Result<(), PruneError> {
    let bytes = encode(layer)?;
    std::fs::write(path, bytes).map_err(|e| PruneError::IoFailure(e.to_string()))
}

pub fn load(path: impl AsRef<Path>, activation: ActivationKind) -> Result<PrunedLayer, PruneError> {
    let bytes = std::fs::read(path).map_err(|e| PruneError::IoFailure(e.to_string()))?;
    decode(&bytes, activation)
}

/// Single-row layer holding the six-weight worked example
/// `(0, -1.5, 0, 0, 0.3, -0.17, 0, 0, 0, 1.1, 0, 0, -0.2, 0, 0.1)`, used for
/// golden-file checks.
pub fn example_row_layer() -> PrunedLayer {
    use crate::fxp::Q7_8;
    let row: Vec<Q7_8> = [
        0.0, -1.5, 0.0, 0.0, 0.3, -0.17, 0.0, 0.0, 0.0, 1.1, 0.0, 0.0, -0.2, 0.0, 0.1,
    ]
    .iter()
    .map(|&x| Q7_8::from_real(x))
    .collect();
    PrunedLayer::from_rows(vec![SparseRow::encode_dense(&row)], row.len(), ActivationKind::Identity)
        .expect("example row fits")
}

/// NNSP bytes of [`example_row_layer`].
pub const EXAMPLE_ROW_GOLDEN: [u8; 33] = [
    b'N', b'N', b'S', b'P', 1, // magic, version
    1, 0, 0, 0, // row_count
    15, 0, 0, 0, // input_width
    6, 0, 0, 0, // nnz
    0x80, 0xFE, 0xA1, 0x09, 0x40, 0x50, 0xFF, 0x03, // (-1.5,1) (0.3,2) (-0.17,0)
    0x1A, 0x01, 0xA3, 0xF9, 0x5F, 0x68, 0x00, 0x04, // (1.1,3) (-0.2,2) (0.1,1)
];
