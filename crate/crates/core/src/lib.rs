//! Functional emulator of an embedded FPGA inference accelerator for
//! fully-connected networks.
//!
//! * [`fxp`]: Q7.8 weights/activations, Q15.16 accumulators.
//! * [`model`]: network container, activations, IDX/CSV ingestion.
//! * [`prune`]: threshold pruning and the packed `(weight, zero-run)` stream.
//! * [`engine`]: reference, batch-processing and pruned-stream engines.
//! * [`perf`]: analytical cycle/time/throughput model.
//! * [`selftest`]: the invariant suite behind `dnnaccel selftest`.

pub mod engine;
pub mod fxp;
pub mod model;
pub mod perf;
pub mod prune;
pub mod selftest;

pub use engine::{EngineConfig, EngineError};
pub use fxp::{Q15_16, Q7_8};
pub use model::{ActivationKind, Dataset, DenseLayer, ModelError, NetworkModel, WeightMatrix};
pub use prune::{PruneError, PrunedLayer, PrunedModel, SparseRow, Tuple};
