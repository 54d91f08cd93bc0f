//! Sparse datapath: `m` row coprocessors, each with a private replica of the
//! I/O memory, walk packed row streams. Processor `p` handles rows
//! `p, p + m, p + 2m, …`; a merger drains the processors' output FIFOs in
//! round-robin order and writes every activation to all replicas.

use std::collections::VecDeque;

use super::{check_width, Diagnostics, EngineConfig, EngineError};
use crate::fxp::{MacUnit, Q7_8};
use crate::model::apply_activation;
use crate::prune::{row_addresses, PrunedLayer, PrunedModel, TUPLES_PER_WORD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseLayerCycles {
    /// Busiest processor: max over processors of `Σ ⌈nnz_row / r⌉`.
    pub emulated: u64,
    /// Uniform-density estimate `⌈s_{j+1}/m⌉ · ⌈s_j (1 − q_prune) / r⌉`.
    pub formula: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOutput {
    pub output: Vec<Q7_8>,
    pub layer_cycles: Vec<SparseLayerCycles>,
    /// Sum of the emulated per-layer cycles.
    pub cycles: u64,
    /// Sum of the formula per-layer cycles.
    pub formula_cycles: u64,
    pub diagnostics: Diagnostics,
}

/// `⌈s_{j+1}/m⌉ · ⌈s_j · (1 − q_prune) / r⌉` for one sample. The stored
/// weight count is used for `s_j · (1 − q_prune)` summed over rows so the
/// product is exact in integers.
pub fn sparse_formula_cycles(layer: &PrunedLayer, cfg: &EngineConfig) -> u64 {
    let kept_per_row = layer.nonzero_weights().div_ceil(layer.row_count());
    (layer.row_count().div_ceil(cfg.units) * kept_per_row.div_ceil(cfg.tuples)) as u64
}

struct RowProcessor {
    memory: Vec<Q7_8>,
    fifo: VecDeque<Q7_8>,
    mac: MacUnit,
    cycles: u64,
}

fn run_layer(
    layer: &PrunedLayer,
    procs: &mut [RowProcessor],
    cfg: &EngineConfig,
    diag: &mut Diagnostics,
) -> Result<u64, EngineError> {
    let m = procs.len();
    for (p, proc_) in procs.iter_mut().enumerate() {
        for row in layer.rows().iter().skip(p).step_by(m) {
            proc_.mac.reset();
            for (addr, t) in row_addresses(row, layer.input_width())?.into_iter().zip(&row.tuples) {
                proc_.mac.step(proc_.memory[addr], t.weight);
            }
            proc_
                .fifo
                .push_back(apply_activation(layer.activation(), proc_.mac.acc));
            proc_.cycles += row.nnz().div_ceil(cfg.tuples) as u64;
            diag.macs += row.nnz() as u64;
        }
    }
    let emulated = procs.iter().map(|p| p.cycles).max().unwrap_or(0);

    // merger: drain FIFOs round-robin, broadcast into every replica
    let mut merged = Vec::with_capacity(layer.row_count());
    for i in 0..layer.row_count() {
        let value = procs[i % m].fifo.pop_front().expect("one result per assigned row");
        merged.push(value);
    }
    for proc_ in procs.iter_mut() {
        proc_.memory.clone_from(&merged);
        proc_.cycles = 0;
        diag.overflows += std::mem::take(&mut proc_.mac.overflows);
    }
    Ok(emulated)
}

/// Single-sample inference through the pruned-stream datapath.
pub fn infer_sparse(model: &PrunedModel, sample: &[Q7_8], cfg: &EngineConfig) -> Result<SparseOutput, EngineError> {
    cfg.validate()?;
    if cfg.tuples != TUPLES_PER_WORD {
        return Err(EngineError::InvalidConfig(format!(
            "the sparse datapath consumes {TUPLES_PER_WORD} tuples per word (r = {TUPLES_PER_WORD}), got r = {}",
            cfg.tuples
        )));
    }
    check_width(model.input_width(), sample)?;

    let mut procs: Vec<RowProcessor> = (0..cfg.units)
        .map(|_| RowProcessor {
            memory: sample.to_vec(),
            fifo: VecDeque::new(),
            mac: MacUnit::default(),
            cycles: 0,
        })
        .collect();
    let mut diagnostics = Diagnostics::default();
    let mut layer_cycles = Vec::with_capacity(model.layers().len());
    for layer in model.layers() {
        let emulated = run_layer(layer, &mut procs, cfg, &mut diagnostics)?;
        layer_cycles.push(SparseLayerCycles {
            emulated,
            formula: sparse_formula_cycles(layer, cfg),
        });
    }
    Ok(SparseOutput {
        output: procs.swap_remove(0).memory,
        cycles: layer_cycles.iter().map(|c| c.emulated).sum(),
        formula_cycles: layer_cycles.iter().map(|c| c.formula).sum(),
        layer_cycles,
        diagnostics,
    })
}
