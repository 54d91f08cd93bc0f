//! Threshold pruning and the packed sparse-row weight stream.
//!
//! A pruned row is a sequence of `(weight, zeros)` tuples where `zeros` is
//! the number of zero weights immediately preceding `weight`. The zero-run
//! field is 5 bits wide; longer gaps are bridged with `(0, 31)` filler tuples
//! that each advance the position by 32. Rows carry no terminator; the number
//! of stored tuples (`nnz`) is kept alongside the stream.

mod codec;
pub mod stream_file;

pub use codec::{overhead_factor, pack_row, row_addresses, unpack_stream, TUPLES_PER_WORD};

use thiserror::Error;

use crate::fxp::Q7_8;
use crate::model::{ActivationKind, DenseLayer, NetworkModel, WeightMatrix};

/// Largest zero-run representable in the 5-bit field.
pub const MAX_ZERO_RUN: u8 = 31;

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("tuple {index} has zero-run {zeros}, the field holds at most 31")]
    ZeroRunOverflow { index: usize, zeros: u8 },
    #[error("word {index} has bit 63 set")]
    BadPadBit { index: usize },
    #[error("expected {expected} words for the declared tuple count, got {found}")]
    WordCountMismatch { expected: usize, found: usize },
    #[error("address {address} is outside the {width} inputs of the row")]
    AddressOutOfRange { address: usize, width: usize },
    #[error("pruning threshold must be finite and non-negative, got {0}")]
    InvalidThreshold(f64),
    #[error("malformed stream file: {0}")]
    MalformedStream(String),
    #[error("unsupported stream file version {0}")]
    UnsupportedVersion(u8),
    #[error("i/o failure: {0}")]
    IoFailure(String),
}

impl PruneError {
    pub fn code(&self) -> &'static str {
        match self {
            PruneError::ZeroRunOverflow { .. } => "ZeroRunOverflow",
            PruneError::BadPadBit { .. } => "BadPadBit",
            PruneError::WordCountMismatch { .. } => "WordCountMismatch",
            PruneError::AddressOutOfRange { .. } => "AddressOutOfRange",
            PruneError::InvalidThreshold(_) => "InvalidThreshold",
            PruneError::MalformedStream(_) => "MalformedStream",
            PruneError::UnsupportedVersion(_) => "UnsupportedVersion",
            PruneError::IoFailure(_) => "IoFailure",
        }
    }
}

/// One stored `(w_l, z_l)` entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tuple {
    pub weight: Q7_8,
    pub zeros: u8,
}

impl Tuple {
    pub const FILLER: Tuple = Tuple {
        weight: Q7_8::ZERO,
        zeros: MAX_ZERO_RUN,
    };

    pub fn new(weight: Q7_8, zeros: u8) -> Self {
        Self { weight, zeros }
    }

    pub fn is_filler(&self) -> bool {
        self.weight.is_zero()
    }
}

/// A single pruned weight-matrix row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SparseRow {
    pub tuples: Vec<Tuple>,
}

impl SparseRow {
    pub fn new(tuples: Vec<Tuple>) -> Self {
        Self { tuples }
    }

    /// Run-length encodes a dense row. Exact zeros are never stored.
    pub fn encode_dense(row: &[Q7_8]) -> Self {
        let mut tuples = Vec::new();
        let mut run = 0usize;
        for &w in row {
            if w.is_zero() {
                run += 1;
                continue;
            }
            while run > MAX_ZERO_RUN as usize {
                tuples.push(Tuple::FILLER);
                run -= MAX_ZERO_RUN as usize + 1;
            }
            tuples.push(Tuple::new(w, run as u8));
            run = 0;
        }
        Self { tuples }
    }

    /// Stored tuples, fillers included.
    pub fn nnz(&self) -> usize {
        self.tuples.len()
    }

    /// Stored tuples that carry a nonzero weight.
    pub fn nonzero_weights(&self) -> usize {
        self.tuples.iter().filter(|t| !t.weight.is_zero()).count()
    }

    /// Number of row positions covered by the tuples, `Σ (z + 1)`.
    pub fn span(&self) -> usize {
        self.tuples.iter().map(|t| t.zeros as usize + 1).sum()
    }

    /// Reconstructs the dense row of the given width.
    pub fn densify(&self, width: usize) -> Result<Vec<Q7_8>, PruneError> {
        let mut dense = vec![Q7_8::ZERO; width];
        for (addr, t) in row_addresses(self, width)?.into_iter().zip(&self.tuples) {
            dense[addr] = t.weight;
        }
        Ok(dense)
    }
}

/// A pruned weight matrix in sparse-row form plus its pruning statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedLayer {
    rows: Vec<SparseRow>,
    input_width: usize,
    activation: ActivationKind,
    row_factors: Vec<f64>,
    q_prune: f64,
}

impl PrunedLayer {
    /// Builds a layer from sparse rows, validating every zero-run field and
    /// every row against `input_width`.
    pub fn from_rows(rows: Vec<SparseRow>, input_width: usize, activation: ActivationKind) -> Result<Self, PruneError> {
        if input_width == 0 || rows.is_empty() {
            return Err(PruneError::MalformedStream(format!(
                "pruned layer must be non-empty, got {} rows of width {input_width}",
                rows.len()
            )));
        }
        for row in &rows {
            if let Some((index, t)) = row.tuples.iter().enumerate().find(|(_, t)| t.zeros > MAX_ZERO_RUN) {
                return Err(PruneError::ZeroRunOverflow { index, zeros: t.zeros });
            }
            if row.span() > input_width {
                return Err(PruneError::AddressOutOfRange {
                    address: row.span() - 1,
                    width: input_width,
                });
            }
        }
        let row_factors: Vec<f64> = rows
            .iter()
            .map(|r| (input_width - r.nonzero_weights()) as f64 / input_width as f64)
            .collect();
        let q_prune = row_factors.iter().sum::<f64>() / rows.len() as f64;
        Ok(Self {
            rows,
            input_width,
            activation,
            row_factors,
            q_prune,
        })
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    /// `s_j`.
    pub fn input_width(&self) -> usize {
        self.input_width
    }

    /// `s_{j+1}`.
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    /// Fraction of zero weights in each row.
    pub fn row_factors(&self) -> &[f64] {
        &self.row_factors
    }

    /// Mean of the row factors.
    pub fn q_prune(&self) -> f64 {
        self.q_prune
    }

    /// Pruning factor counting filler tuples as stored weights.
    pub fn stored_q_prune(&self) -> f64 {
        1.0 - self.stored_tuples() as f64 / (self.input_width * self.rows.len()) as f64
    }

    pub fn stored_tuples(&self) -> usize {
        self.rows.iter().map(SparseRow::nnz).sum()
    }

    pub fn filler_tuples(&self) -> usize {
        self.stored_tuples() - self.nonzero_weights()
    }

    pub fn nonzero_weights(&self) -> usize {
        self.rows.iter().map(SparseRow::nonzero_weights).sum()
    }

    /// Packed 64-bit words over all rows.
    pub fn word_count(&self) -> usize {
        self.rows.iter().map(|r| r.nnz().div_ceil(TUPLES_PER_WORD)).sum()
    }
}

/// Sets every weight with `|w| < delta` to zero and re-encodes the matrix
/// as sparse rows.
pub fn prune_matrix(layer: &DenseLayer, delta: f64) -> Result<PrunedLayer, PruneError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(PruneError::InvalidThreshold(delta));
    }
    let rows = layer
        .weights
        .iter_rows()
        .map(|row| {
            let kept: Vec<Q7_8> = row
                .iter()
                .map(|&w| if w.to_f64().abs() < delta { Q7_8::ZERO } else { w })
                .collect();
            SparseRow::encode_dense(&kept)
        })
        .collect();
    PrunedLayer::from_rows(rows, layer.inputs(), layer.activation)
}

/// Expands a pruned layer back to a dense layer with explicit zeros.
pub fn densify(pruned: &PrunedLayer) -> DenseLayer {
    let width = pruned.input_width();
    let mut weights = WeightMatrix::zeros(pruned.row_count(), width);
    for (i, row) in pruned.rows().iter().enumerate() {
        let dense = row.densify(width).expect("rows validated on construction");
        weights.row_mut(i).copy_from_slice(&dense);
    }
    DenseLayer::new(weights, pruned.activation())
}

/// A whole network in pruned form.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedModel {
    layers: Vec<PrunedLayer>,
}

impl PrunedModel {
    pub fn new(layers: Vec<PrunedLayer>) -> Result<Self, PruneError> {
        if layers.is_empty() {
            return Err(PruneError::MalformedStream("no layers".into()));
        }
        for (j, pair) in layers.windows(2).enumerate() {
            if pair[0].row_count() != pair[1].input_width() {
                return Err(PruneError::MalformedStream(format!(
                    "layer {j} has {} rows but layer {} expects {} inputs",
                    pair[0].row_count(),
                    j + 1,
                    pair[1].input_width()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[PrunedLayer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    /// Fraction of all weights of the network that are zero.
    pub fn overall_q_prune(&self) -> f64 {
        let total: usize = self.layers.iter().map(|l| l.input_width() * l.row_count()).sum();
        let kept: usize = self.layers.iter().map(PrunedLayer::nonzero_weights).sum();
        1.0 - kept as f64 / total as f64
    }

    pub fn densify(&self) -> NetworkModel {
        NetworkModel::new(self.layers.iter().map(densify).collect()).expect("widths validated on construction")
    }
}

pub fn prune_model(model: &NetworkModel, delta: f64) -> Result<PrunedModel, PruneError> {
    let layers = model
        .layers()
        .iter()
        .map(|l| prune_matrix(l, delta))
        .collect::<Result<Vec<_>, _>>()?;
    PrunedModel::new(layers)
}
