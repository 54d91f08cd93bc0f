//! Functional emulation of the two accelerator datapaths.
//!
//! All engines share the same arithmetic (Q7.8 × Q7.8 products accumulated
//! in saturating Q15.16, activation at accumulator precision, truncating
//! narrow back to Q7.8) and accumulate each neuron's inputs in ascending
//! input order, so their outputs are bit-identical. They differ in
//! scheduling and in the cycle counts they report.

mod batch;
mod eval;
mod reference;
mod sparse;

pub use batch::{batch_layer_cycles, infer_batch, BatchBuffer, BatchOutput, BufferRole, SectionSchedule};
pub use eval::{classify, evaluate_accuracy, run_all, AccuracyReport, Evaluator};
pub use reference::infer_reference;
pub use sparse::{infer_sparse, sparse_formula_cycles, SparseLayerCycles, SparseOutput};

use thiserror::Error;

use crate::prune::{PruneError, TUPLES_PER_WORD};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("sample has {found} values, the network expects {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("batch holds {found} samples, the engine is configured for {expected}")]
    BatchSizeMismatch { expected: usize, found: usize },
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Stream(#[from] PruneError),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::WidthMismatch { .. } => "WidthMismatch",
            EngineError::BatchSizeMismatch { .. } => "BatchSizeMismatch",
            EngineError::InvalidConfig(_) => "InvalidConfig",
            EngineError::MissingLabels => "MissingLabels",
            EngineError::EmptyDataset => "EmptyDataset",
            EngineError::Stream(e) => e.code(),
        }
    }
}

/// Hardware parameters shared by the engines and the performance model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// `m`: parallel processing units.
    pub units: usize,
    /// `r`: compute resources per unit (1 for the batch datapath, 3 for the
    /// sparse datapath).
    pub tuples: usize,
    /// `n`: batch size.
    pub batch_size: usize,
    /// `f_pu` in Hz.
    pub fpu_hz: f64,
    /// `T_mem` in bytes per second.
    pub mem_bytes_per_sec: f64,
    /// `b_weight` in bits.
    pub weight_bits: u32,
    /// `c_a`: activation latency in cycles.
    pub activation_cycles: usize,
}

impl EngineConfig {
    /// Batch datapath with `m` units, batch size `n`, and one MAC per unit.
    pub fn batch(units: usize, batch_size: usize) -> Self {
        Self {
            units,
            tuples: 1,
            batch_size,
            ..Self::default()
        }
    }

    /// Sparse datapath with `m` row coprocessors consuming three tuples per
    /// cycle.
    pub fn sparse(units: usize) -> Self {
        Self {
            units,
            tuples: TUPLES_PER_WORD,
            batch_size: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = [
            ("units", self.units),
            ("tuples", self.tuples),
            ("batch size", self.batch_size),
            ("activation cycles", self.activation_cycles),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(EngineError::InvalidConfig(format!("{name} must be at least 1")));
        }
        if !(self.fpu_hz > 0.0 && self.mem_bytes_per_sec > 0.0 && self.weight_bits > 0) {
            return Err(EngineError::InvalidConfig(
                "clock, memory throughput and weight size must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for EngineConfig {
    /// 114 units at 100 MHz with 16-bit weights; the memory throughput is
    /// the effective value at which the optimal batch size is 12.66.
    fn default() -> Self {
        Self {
            units: 114,
            tuples: 1,
            batch_size: 1,
            fpu_hz: 100e6,
            mem_bytes_per_sec: DEFAULT_MEM_BYTES_PER_SEC,
            weight_bits: 16,
            activation_cycles: 1,
        }
    }
}

/// `114 · 1 · 10^8 · 2 bytes / 12.66`.
pub const DEFAULT_MEM_BYTES_PER_SEC: f64 = 114.0 * 1e8 * 2.0 / 12.66;

/// Per-run counters that do not affect results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Accumulator saturation events.
    pub overflows: u64,
    /// MAC operations actually executed.
    pub macs: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: Diagnostics) {
        self.overflows += other.overflows;
        self.macs += other.macs;
    }
}

pub(crate) fn check_width(expected: usize, sample: &[crate::fxp::Q7_8]) -> Result<(), EngineError> {
    if sample.len() != expected {
        return Err(EngineError::WidthMismatch {
            expected,
            found: sample.len(),
        });
    }
    Ok(())
}
