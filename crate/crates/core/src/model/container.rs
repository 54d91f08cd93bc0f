//! NNSM model container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NNSM"
//! 4       1     version (1)
//! 5       1     number of weight matrices (L - 1)
//! per matrix:
//!         4     rows, u32 LE
//!         4     cols, u32 LE
//!         1     activation code (0 relu, 1 sigmoid-plan, 2 identity)
//!         2·r·c raw Q7.8 weights, i16 LE, row-major
//! ```

use std::path::Path;

use super::{ActivationKind, DenseLayer, ModelError, NetworkModel, WeightMatrix};
use crate::fxp::Q7_8;

pub const MAGIC: &[u8; 4] = b"NNSM";
pub const VERSION: u8 = 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ModelError::MalformedContainer(format!(
                "truncated while reading {what} at offset {}",
                self.pos
            ))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8, ModelError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32_le(&mut self, what: &str) -> Result<u32, ModelError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Decodes and validates an NNSM byte image.
pub fn decode(bytes: &[u8]) -> Result<NetworkModel, ModelError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(ModelError::MalformedContainer("bad magic, expected \"NNSM\"".into()));
    }
    let version = cur.u8("version")?;
    if version != VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let count = cur.u8("layer count")? as usize;
    if count == 0 {
        return Err(ModelError::MalformedContainer("zero weight matrices".into()));
    }

    let mut layers = Vec::with_capacity(count);
    for j in 0..count {
        let rows = cur.u32_le("rows")? as usize;
        let cols = cur.u32_le("cols")? as usize;
        let code = cur.u8("activation code")?;
        let activation = ActivationKind::from_code(code)
            .ok_or_else(|| ModelError::MalformedContainer(format!("layer {j}: unknown activation code {code}")))?;
        if rows == 0 || cols == 0 {
            return Err(ModelError::MalformedContainer(format!(
                "layer {j}: empty {rows}x{cols} matrix"
            )));
        }
        if let Some(prev) = layers.last().map(DenseLayer::outputs) {
            if prev != cols {
                return Err(ModelError::DimensionMismatch(format!(
                    "layer {} has {prev} rows but layer {j} has {cols} columns",
                    j - 1
                )));
            }
        }
        let payload = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(2))
            .filter(|&n| n <= cur.remaining())
            .ok_or_else(|| {
                ModelError::MalformedContainer(format!(
                    "layer {j}: {rows}x{cols} weights exceed the remaining {} bytes",
                    cur.remaining()
                ))
            })?;
        let data = cur
            .take(payload, "weights")?
            .chunks_exact(2)
            .map(|b| Q7_8::from_raw(i16::from_le_bytes([b[0], b[1]])))
            .collect();
        layers.push(DenseLayer::new(WeightMatrix::new(rows, cols, data)?, activation));
    }
    if cur.remaining() != 0 {
        return Err(ModelError::MalformedContainer(format!(
            "{} trailing bytes after last layer",
            cur.remaining()
        )));
    }
    NetworkModel::new(layers)
}

pub fn encode(model: &NetworkModel) -> Result<Vec<u8>, ModelError> {
    let layers = model.layers();
    let count = u8::try_from(layers.len())
        .map_err(|_| ModelError::MalformedContainer(format!("{} layers exceed the u8 count field", layers.len())))?;
    let mut out = Vec::with_capacity(6 + layers.iter().map(|l| 9 + 2 * l.weights.as_slice().len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(count);
    for layer in layers {
        let dim = |n: usize| {
            u32::try_from(n).map_err(|_| ModelError::MalformedContainer(format!("dimension {n} exceeds u32")))
        };
        out.extend_from_slice(&dim(layer.outputs())?.to_le_bytes());
        out.extend_from_slice(&dim(layer.inputs())?.to_le_bytes());
        out.push(layer.activation.code());
        for w in layer.weights.as_slice() {
            out.extend_from_slice(&w.raw().to_le_bytes());
        }
    }
    Ok(out)
}

/// Reads and validates a model file. Unreadable files are reported as
/// malformed containers.
pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel, ModelError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)
        .map_err(|e| ModelError::MalformedContainer(format!("cannot read {}: {e}", path.display())))?;
    decode(&bytes)
}

pub fn save_model(model: &NetworkModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let bytes = encode(model)?;
    std::fs::write(path, bytes)?;
    Ok(())
}
