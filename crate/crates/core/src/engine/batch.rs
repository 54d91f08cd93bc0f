//! Batch datapath: `m` MAC units work on one section of `m` neurons, and the
//! section's weights are reused for all `n` samples of the batch before the
//! next section is fetched. Two batch memories alternate between the input
//! and output role from one layer to the next.

use super::{check_width, Diagnostics, EngineConfig, EngineError};
use crate::fxp::{MacUnit, Q7_8};
use crate::model::{apply_activation, DenseLayer, NetworkModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferRole {
    Input,
    Output,
}

/// `n` activation vectors of one layer.
#[derive(Debug, Clone)]
pub struct BatchBuffer {
    pub samples: Vec<Vec<Q7_8>>,
    pub role: BufferRole,
}

/// A group of at most `m` consecutive neurons of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionSchedule {
    pub layer: usize,
    pub section: usize,
    pub start: usize,
    pub end: usize,
}

impl SectionSchedule {
    /// Sections tiling `[0, neurons)` in steps of `units`.
    pub fn tile(layer: usize, neurons: usize, units: usize) -> impl Iterator<Item = SectionSchedule> {
        (0..neurons.div_ceil(units)).map(move |section| SectionSchedule {
            layer,
            section,
            start: section * units,
            end: (section * units + units).min(neurons),
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// `⌈s_{j+1}/m⌉ · s_j · n + m · c_a`.
pub fn batch_layer_cycles(inputs: usize, outputs: usize, cfg: &EngineConfig) -> u64 {
    (outputs.div_ceil(cfg.units) * inputs * cfg.batch_size + cfg.units * cfg.activation_cycles) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub outputs: Vec<Vec<Q7_8>>,
    pub layer_cycles: Vec<u64>,
    pub cycles: u64,
    pub diagnostics: Diagnostics,
}

fn run_layer(
    layer: &DenseLayer,
    layer_index: usize,
    input: &BatchBuffer,
    output: &mut BatchBuffer,
    cfg: &EngineConfig,
    diag: &mut Diagnostics,
) {
    debug_assert_eq!(input.role, BufferRole::Input);
    debug_assert_eq!(output.role, BufferRole::Output);
    let mut units = vec![MacUnit::default(); cfg.units];
    for out in &mut output.samples {
        out.clear();
        out.resize(layer.outputs(), Q7_8::ZERO);
    }
    for section in SectionSchedule::tile(layer_index, layer.outputs(), cfg.units) {
        // weights of this section stay resident while every sample streams by
        for (sample, out) in input.samples.iter().zip(output.samples.iter_mut()) {
            let active = &mut units[..section.len()];
            active.iter_mut().for_each(MacUnit::reset);
            for (k, &a) in sample.iter().enumerate() {
                for (p, unit) in active.iter_mut().enumerate() {
                    unit.step(a, layer.weights.get(section.start + p, k));
                }
            }
            for (p, unit) in active.iter().enumerate() {
                out[section.start + p] = apply_activation(layer.activation, unit.acc);
            }
            diag.macs += (section.len() * sample.len()) as u64;
        }
    }
    diag.overflows += units.iter().map(|u| u.overflows).sum::<u64>();
}

/// Runs a full batch of exactly `cfg.batch_size` samples through the batch
/// datapath.
pub fn infer_batch(model: &NetworkModel, batch: &[Vec<Q7_8>], cfg: &EngineConfig) -> Result<BatchOutput, EngineError> {
    cfg.validate()?;
    if cfg.tuples != 1 {
        return Err(EngineError::InvalidConfig(format!(
            "the batch datapath has one MAC per unit (r = 1), got r = {}",
            cfg.tuples
        )));
    }
    if batch.len() != cfg.batch_size {
        return Err(EngineError::BatchSizeMismatch {
            expected: cfg.batch_size,
            found: batch.len(),
        });
    }
    for sample in batch {
        check_width(model.input_width(), sample)?;
    }

    let mut input = BatchBuffer {
        samples: batch.to_vec(),
        role: BufferRole::Input,
    };
    let mut output = BatchBuffer {
        samples: vec![Vec::new(); batch.len()],
        role: BufferRole::Output,
    };
    let mut diagnostics = Diagnostics::default();
    let mut layer_cycles = Vec::with_capacity(model.layers().len());
    for (j, layer) in model.layers().iter().enumerate() {
        run_layer(layer, j, &input, &mut output, cfg, &mut diagnostics);
        layer_cycles.push(batch_layer_cycles(layer.inputs(), layer.outputs(), cfg));
        // crossbar flip: this layer's outputs feed the next one
        std::mem::swap(&mut input, &mut output);
        input.role = BufferRole::Input;
        output.role = BufferRole::Output;
    }
    Ok(BatchOutput {
        outputs: input.samples,
        cycles: layer_cycles.iter().sum(),
        layer_cycles,
        diagnostics,
    })
}
