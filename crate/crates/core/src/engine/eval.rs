use super::{infer_batch, infer_reference, infer_sparse, Diagnostics, EngineConfig, EngineError};
use crate::fxp::Q7_8;
use crate::model::{Dataset, NetworkModel};
use crate::prune::PrunedModel;

/// Index of the largest output, lowest index on ties.
///
/// # Panics
/// On an empty vector.
pub fn classify(output: &[Q7_8]) -> usize {
    assert!(!output.is_empty(), "cannot classify an empty output");
    output
        .iter()
        .enumerate()
        .fold((0, output[0]), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Which engine runs the evaluation, with the network in the form it needs.
#[derive(Debug, Clone, Copy)]
pub enum Evaluator<'a> {
    Reference(&'a NetworkModel),
    Batch(&'a NetworkModel),
    Sparse(&'a PrunedModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    /// Emulated cycles over the whole dataset (reference engine reports 0).
    pub cycles: u64,
    pub diagnostics: Diagnostics,
}

/// Runs every sample and scores `classify` against the labels. The batch
/// engine pads a final partial batch with copies of the last sample and
/// discards the padded outputs; their cycles still count.
pub fn evaluate_accuracy(
    evaluator: Evaluator<'_>,
    dataset: &Dataset,
    cfg: &EngineConfig,
) -> Result<AccuracyReport, EngineError> {
    if dataset.is_empty() {
        return Err(EngineError::EmptyDataset);
    }
    let labels = dataset.labels.as_ref().ok_or(EngineError::MissingLabels)?;
    let (outputs, cycles, diagnostics) = run_all(evaluator, &dataset.samples, cfg)?;
    let predictions: Vec<usize> = outputs.iter().map(|o| classify(o)).collect();
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(AccuracyReport {
        correct,
        total: predictions.len(),
        accuracy: correct as f64 / predictions.len() as f64,
        predictions,
        cycles,
        diagnostics,
    })
}

/// Outputs for every sample, total cycles, and counters.
pub fn run_all(
    evaluator: Evaluator<'_>,
    samples: &[Vec<Q7_8>],
    cfg: &EngineConfig,
) -> Result<(Vec<Vec<Q7_8>>, u64, Diagnostics), EngineError> {
    let mut diag = Diagnostics::default();
    match evaluator {
        Evaluator::Reference(model) => {
            let outs = samples
                .iter()
                .map(|s| infer_reference(model, s))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((outs, 0, diag))
        }
        Evaluator::Batch(model) => {
            let n = cfg.batch_size.max(1);
            let mut outs = Vec::with_capacity(samples.len());
            let mut cycles = 0;
            for chunk in samples.chunks(n) {
                let mut batch = chunk.to_vec();
                batch.resize(n, chunk[chunk.len() - 1].clone());
                let res = infer_batch(model, &batch, cfg)?;
                outs.extend(res.outputs.into_iter().take(chunk.len()));
                cycles += res.cycles;
                diag.merge(res.diagnostics);
            }
            Ok((outs, cycles, diag))
        }
        Evaluator::Sparse(model) => {
            let mut outs = Vec::with_capacity(samples.len());
            let mut cycles = 0;
            for s in samples {
                let res = infer_sparse(model, s, cfg)?;
                outs.push(res.output);
                cycles += res.cycles;
                diag.merge(res.diagnostics);
            }
            Ok((outs, cycles, diag))
        }
    }
}
