use std::fmt::Write as _;

use serde::Serialize;

use super::{gops, layer_cycles, n_opt, t_calc, t_mem, t_proc, Bound, PerfError, PerfParams};
use crate::engine::EngineConfig;

/// Everything the model says about one layer configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub params: PerfParams,
    pub cycles: u64,
    pub t_calc: f64,
    pub t_mem: f64,
    pub t_proc: f64,
    pub bound: Bound,
    /// Executed MACs per second at `t_proc`.
    pub gops: f64,
    /// Dense-equivalent MACs per second at `t_proc`.
    pub effective_gops: Option<f64>,
    pub n_opt: f64,
    /// Smallest integer batch size that is compute-bound.
    pub n_opt_ceil: u64,
    pub per_sample_latency: f64,
    pub batch_latency: f64,
    /// `N / n`.
    pub batches: f64,
}

impl PerfReport {
    pub fn evaluate(params: &PerfParams) -> Result<Self, PerfError> {
        params.validate()?;
        let (proc_time, bound) = t_proc(params);
        let rates = if proc_time > 0.0 {
            gops(params.dense_macs(), proc_time, params.q_prune)?
        } else {
            super::Throughput {
                actual: 0.0,
                effective: None,
            }
        };
        let per_sample = proc_time / params.samples as f64;
        let n_opt = n_opt(params);
        Ok(Self {
            params: *params,
            cycles: layer_cycles(params),
            t_calc: t_calc(params),
            t_mem: t_mem(params),
            t_proc: proc_time,
            bound,
            gops: rates.actual / 1e9,
            effective_gops: rates.effective.map(|g| g / 1e9),
            n_opt,
            n_opt_ceil: n_opt.ceil().max(1.0) as u64,
            per_sample_latency: per_sample,
            batch_latency: super::batch_latency(per_sample, params.batch_size),
            batches: params.batches(),
        })
    }

    /// Line-oriented `key=value` rendering. Times are in seconds, rates in
    /// GOps/s.
    pub fn to_key_value(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let effective = self.effective_gops.map_or("none".to_string(), |g| format!("{g:.6}"));
        let lines: [(&str, String); 20] = [
            ("inputs", p.inputs.to_string()),
            ("outputs", p.outputs.to_string()),
            ("samples", p.samples.to_string()),
            ("batch_size", p.batch_size.to_string()),
            ("units", p.units.to_string()),
            ("tuples", p.tuples.to_string()),
            ("q_prune", format!("{:.6}", p.q_prune)),
            ("q_overhead", format!("{:.6}", p.q_overhead)),
            ("cycles", self.cycles.to_string()),
            ("t_calc_s", format!("{:.9e}", self.t_calc)),
            ("t_mem_s", format!("{:.9e}", self.t_mem)),
            ("t_proc_s", format!("{:.9e}", self.t_proc)),
            ("bound", self.bound.as_str().to_string()),
            ("gops", format!("{:.6}", self.gops)),
            ("effective_gops", effective),
            ("n_opt", format!("{:.6}", self.n_opt)),
            ("n_opt_ceil", self.n_opt_ceil.to_string()),
            ("per_sample_latency_s", format!("{:.9e}", self.per_sample_latency)),
            ("batch_latency_s", format!("{:.9e}", self.batch_latency)),
            ("batches", format!("{:.6}", self.batches)),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn to_json(&self) -> Result<String, PerfError> {
        serde_json::to_string_pretty(self).map_err(|e| PerfError::Serialization(e.to_string()))
    }
}

/// Axis names accepted by [`Sweep::run`], with aliases.
pub const SWEEP_AXES: &[&str] = &[
    "n",
    "batch_size",
    "m",
    "units",
    "r",
    "tuples",
    "q_prune",
    "t_mem",
    "mem_bytes_per_sec",
    "f_pu",
    "fpu_hz",
    "b_weight",
    "weight_bits",
    "q_overhead",
    "N",
    "samples",
    "s_j",
    "inputs",
    "s_j1",
    "outputs",
];

fn set_axis(p: &mut PerfParams, axis: &str, value: f64) -> Result<(), PerfError> {
    let count = |v: f64| -> Result<u64, PerfError> {
        if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
            Ok(v as u64)
        } else {
            Err(PerfError::InvalidParams(format!(
                "{axis} needs a positive integer, got {v}"
            )))
        }
    };
    match axis {
        "n" | "batch_size" => p.batch_size = count(value)?,
        "m" | "units" => p.units = count(value)?,
        "r" | "tuples" => p.tuples = count(value)?,
        "N" | "samples" => p.samples = count(value)?,
        "s_j" | "inputs" => p.inputs = count(value)?,
        "s_j1" | "outputs" => p.outputs = count(value)?,
        "q_prune" => p.q_prune = value,
        "t_mem" | "mem_bytes_per_sec" => p.mem_bytes_per_sec = value,
        "f_pu" | "fpu_hz" => p.fpu_hz = value,
        "b_weight" | "weight_bits" => p.weight_bits = value,
        "q_overhead" => p.q_overhead = value,
        _ => return Err(PerfError::UnknownAxis(axis.to_string())),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: PerfReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepDiagnostics {
    pub t_proc_non_increasing: bool,
    pub t_proc_non_decreasing: bool,
    pub t_calc_non_increasing: bool,
    /// First swept value whose configuration is compute-bound.
    pub first_compute_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub axis: String,
    pub points: Vec<SweepPoint>,
    pub diagnostics: SweepDiagnostics,
}

impl Sweep {
    /// One report per value of `axis`, all other parameters from `base`.
    pub fn run(base: &PerfParams, axis: &str, values: &[f64]) -> Result<Self, PerfError> {
        let mut probe = *base;
        if !SWEEP_AXES.contains(&axis) {
            return Err(PerfError::UnknownAxis(axis.to_string()));
        }
        let points = values
            .iter()
            .map(|&value| {
                set_axis(&mut probe, axis, value)?;
                Ok(SweepPoint {
                    value,
                    report: PerfReport::evaluate(&probe)?,
                })
            })
            .collect::<Result<Vec<_>, PerfError>>()?;
        let pairs = || points.windows(2).map(|w| (&w[0].report, &w[1].report));
        let diagnostics = SweepDiagnostics {
            t_proc_non_increasing: pairs().all(|(a, b)| b.t_proc <= a.t_proc),
            t_proc_non_decreasing: pairs().all(|(a, b)| b.t_proc >= a.t_proc),
            t_calc_non_increasing: pairs().all(|(a, b)| b.t_calc <= a.t_calc),
            first_compute_bound: points
                .iter()
                .find(|p| p.report.bound == Bound::ComputeBound)
                .map(|p| p.value),
        };
        Ok(Self {
            axis: axis.to_string(),
            points,
            diagnostics,
        })
    }

    pub fn to_csv(&self) -> Result<String, PerfError> {
        let err = |e: csv::Error| PerfError::Serialization(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            self.axis.as_str(),
            "cycles",
            "t_calc_s",
            "t_mem_s",
            "t_proc_s",
            "bound",
            "gops",
            "effective_gops",
            "per_sample_latency_s",
            "batch_latency_s",
            "n_opt",
        ])
        .map_err(err)?;
        for p in &self.points {
            let r = &p.report;
            w.write_record([
                p.value.to_string(),
                r.cycles.to_string(),
                format!("{:.9e}", r.t_calc),
                format!("{:.9e}", r.t_mem),
                format!("{:.9e}", r.t_proc),
                r.bound.as_str().to_string(),
                format!("{:.6}", r.gops),
                r.effective_gops.map_or(String::new(), |g| format!("{g:.6}")),
                format!("{:.9e}", r.per_sample_latency),
                format!("{:.9e}", r.batch_latency),
                format!("{:.6}", r.n_opt),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| PerfError::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| PerfError::Serialization(e.to_string()))
    }

    /// Fixed-width text table with the optimal batch size marked.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:>14} {:>12} {:>14} {:>14} {:>14} {:>8} {:>10}\n",
            self.axis, "cycles", "t_calc_ms", "t_mem_ms", "t_proc_ms", "bound", "gops"
        );
        let n_opt = self.points.first().map(|p| p.report.n_opt);
        let batch_axis = self.axis == "n" || self.axis == "batch_size";
        let first_optimal = n_opt
            .filter(|_| batch_axis)
            .and_then(|opt| self.points.iter().position(|q| q.value >= opt));
        for (i, p) in self.points.iter().enumerate() {
            let r = &p.report;
            let mark = if first_optimal == Some(i) {
                "  <- first n >= n_opt"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "{:>14} {:>12} {:>14.6} {:>14.6} {:>14.6} {:>8} {:>10.4}{mark}",
                p.value,
                r.cycles,
                r.t_calc * 1e3,
                r.t_mem * 1e3,
                r.t_proc * 1e3,
                r.bound.as_str(),
                r.gops
            );
        }
        if let Some(opt) = n_opt {
            let _ = writeln!(s, "n_opt={opt:.4} (recommended batch size {})", opt.ceil());
        }
        s
    }
}

/// Model estimate for a whole network: one report per layer and totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkPerf {
    pub layers: Vec<PerfReport>,
    pub total_t_proc: f64,
    pub per_sample_time: f64,
    pub dense_macs_per_sample: u64,
    pub executed_macs_per_sample: f64,
    pub gops: f64,
    pub effective_gops: Option<f64>,
}

impl NetworkPerf {
    /// `shapes` are `(s_j, s_{j+1}, q_prune)` per layer; `samples` is `N`.
    pub fn estimate(
        shapes: &[(usize, usize, f64)],
        cfg: &EngineConfig,
        samples: u64,
        q_overhead: f64,
    ) -> Result<Self, PerfError> {
        let layers = shapes
            .iter()
            .map(|&(inputs, outputs, q_prune)| {
                let mut p = PerfParams::for_layer(inputs, outputs, cfg);
                p.samples = samples;
                p.q_prune = q_prune;
                p.q_overhead = q_overhead;
                PerfReport::evaluate(&p)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let total_t_proc: f64 = layers.iter().map(|r| r.t_proc).sum();
        let dense: u64 = shapes.iter().map(|&(i, o, _)| (i * o) as u64).sum();
        let executed: f64 = shapes.iter().map(|&(i, o, q)| (i * o) as f64 * (1.0 - q)).sum();
        let per_sample_time = total_t_proc / samples as f64;
        let (gops, effective_gops) = if total_t_proc > 0.0 {
            let actual = executed / per_sample_time / 1e9;
            (actual, (executed > 0.0).then(|| dense as f64 / per_sample_time / 1e9))
        } else {
            (0.0, None)
        };
        Ok(Self {
            layers,
            total_t_proc,
            per_sample_time,
            dense_macs_per_sample: dense,
            executed_macs_per_sample: executed,
            gops,
            effective_gops,
        })
    }
}
