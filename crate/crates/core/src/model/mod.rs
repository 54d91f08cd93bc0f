//! Network models, activations, and data ingestion.

mod activation;
pub mod container;
pub mod dataset;
pub mod synth;

pub use activation::{
    apply_activation, relu, sigmoid_plan, ActivationKind, PlanSegment, PLAN_SATURATION, PLAN_SEGMENTS,
};
pub use container::{load_model, save_model};
pub use dataset::{load_csv_vectors, load_idx, Dataset};

use crate::fxp::Q7_8;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

impl ModelError {
    /// Stable identifier for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::MalformedContainer(_) => "MalformedContainer",
            ModelError::DimensionMismatch(_) => "DimensionMismatch",
            ModelError::UnsupportedVersion(_) => "UnsupportedVersion",
            ModelError::IoFailure(_) => "IoFailure",
        }
    }
}

/// Row-major weight matrix. Rows are neurons of the next layer, columns are
/// inputs from the previous layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Q7_8>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Q7_8>) -> Result<Self, ModelError> {
        if rows == 0 || cols == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "weight matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(ModelError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Q7_8::ZERO; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<Q7_8>]) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(ModelError::DimensionMismatch(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Q7_8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Q7_8] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, k: usize) -> Q7_8 {
        self.data[i * self.cols + k]
    }

    pub fn as_slice(&self) -> &[Q7_8] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[Q7_8]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Fully-connected layer: `s_{j+1} × s_j` weights plus the activation that
/// follows the transfer function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLayer {
    pub weights: WeightMatrix,
    pub activation: ActivationKind,
}

impl DenseLayer {
    pub fn new(weights: WeightMatrix, activation: ActivationKind) -> Self {
        Self { weights, activation }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

/// Ordered stack of dense layers with consistent widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkModel {
    layers: Vec<DenseLayer>,
}

impl NetworkModel {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::DimensionMismatch(
                "a network needs at least one weight matrix".into(),
            ));
        }
        for (j, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(ModelError::DimensionMismatch(format!(
                    "layer {j} produces {} outputs but layer {} expects {} inputs",
                    pair[0].outputs(),
                    j + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<DenseLayer> {
        self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Neuron counts `s_0, s_1, …, s_{L-1}`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(DenseLayer::outputs))
            .collect()
    }

    /// `"784 × 800 × 10"` style architecture string.
    pub fn architecture(&self) -> String {
        self.widths()
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" × ")
    }

    /// Number of weights, i.e. MACs per sample for a dense forward pass.
    pub fn parameter_count(&self) -> u64 {
        self.layers.iter().map(|l| (l.inputs() * l.outputs()) as u64).sum()
    }
}
