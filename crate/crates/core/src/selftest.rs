//! Embedded invariant checks, runnable from the command line.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{batch_layer_cycles, infer_batch, infer_reference, infer_sparse, EngineConfig};
use crate::fxp::Q15_16;
use crate::model::sigmoid_plan;
use crate::model::synth::{random_model, random_vector, random_widths};
use crate::perf::{layer_cycles, n_opt, PerfParams};
use crate::prune::stream_file::{self, example_row_layer, EXAMPLE_ROW_GOLDEN};
use crate::prune::{overhead_factor, pack_row, prune_model, row_addresses, unpack_stream, SparseRow, Tuple};

pub const DEFAULT_SEED: u64 = 0x5E1F_7E57;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed={:#x}", self.seed)?;
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{status} {}: {}", c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(
            f,
            "selftest {}: {} checks, {failed} failed",
            if failed == 0 { "passed" } else { "FAILED" },
            self.checks.len()
        )
    }
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn codec_golden(golden: &[u8]) -> Check {
    let bytes = stream_file::encode(&example_row_layer()).map_err(|e| e.to_string())?;
    ensure(bytes == golden, || {
        format!("encoded {bytes:02x?}, golden {golden:02x?}")
    })?;
    let addrs = row_addresses(&example_row_layer().rows()[0], 15).map_err(|e| e.to_string())?;
    ensure(addrs == [1, 4, 5, 9, 12, 14], || format!("addresses {addrs:?}"))?;
    Ok(format!("{} bytes, addresses {addrs:?}", bytes.len()))
}

fn codec_round_trip(rng: &mut ChaCha8Rng) -> Check {
    let rows = 2000;
    for i in 0..rows {
        let nnz = rng.random_range(0..24);
        let row = SparseRow::new(
            (0..nnz)
                .map(|_| {
                    let zeros = if rng.random_bool(0.2) {
                        31
                    } else {
                        rng.random_range(0..=31)
                    };
                    Tuple::new(crate::fxp::Q7_8::from_raw(rng.random()), zeros)
                })
                .collect(),
        );
        let words = pack_row(&row).map_err(|e| e.to_string())?;
        ensure(words.iter().all(|w| w >> 63 == 0), || format!("row {i}: pad bit set"))?;
        let back = unpack_stream(&words, row.nnz()).map_err(|e| e.to_string())?;
        ensure(back == row, || format!("row {i} did not round-trip"))?;
    }
    Ok(format!("{rows} random rows"))
}

fn sparse_equivalence(rng: &mut ChaCha8Rng) -> Check {
    let mut trials = 0;
    for _ in 0..40 {
        let depth = rng.random_range(1..=4);
        let widths = random_widths(rng, depth, 4, 48);
        let model = random_model(rng, &widths, 1.0);
        for delta in [0.0, 0.05, 0.1, 0.5] {
            let pruned = prune_model(&model, delta).map_err(|e| e.to_string())?;
            let dense = pruned.densify();
            let x = random_vector(rng, widths[0], 1.0);
            let cfg = EngineConfig::sparse(rng.random_range(1..=8));
            let got = infer_sparse(&pruned, &x, &cfg).map_err(|e| e.to_string())?;
            let want = infer_reference(&dense, &x).map_err(|e| e.to_string())?;
            ensure(got.output == want, || {
                format!("mismatch for widths {widths:?}, delta {delta}")
            })?;
            trials += 1;
        }
    }
    Ok(format!("{trials} pruned models"))
}

fn batch_invariance(rng: &mut ChaCha8Rng) -> Check {
    let mut trials = 0;
    for _ in 0..20 {
        let depth = rng.random_range(1..=3);
        let widths = random_widths(rng, depth, 4, 32);
        let model = random_model(rng, &widths, 1.0);
        for n in [1, 2, 4, 8, 16, 32] {
            let batch: Vec<_> = (0..n).map(|_| random_vector(rng, widths[0], 1.0)).collect();
            let cfg = EngineConfig::batch(rng.random_range(1..=16), n);
            let out = infer_batch(&model, &batch, &cfg).map_err(|e| e.to_string())?;
            for (x, y) in batch.iter().zip(&out.outputs) {
                let want = infer_reference(&model, x).map_err(|e| e.to_string())?;
                ensure(*y == want, || format!("mismatch for widths {widths:?}, n {n}"))?;
            }
            for (layer, &cycles) in model.layers().iter().zip(&out.layer_cycles) {
                let formula = (layer.outputs().div_ceil(cfg.units) * layer.inputs() * n + cfg.units) as u64;
                ensure(cycles == formula, || format!("cycles {cycles} != formula {formula}"))?;
                let p = PerfParams::for_layer(layer.inputs(), layer.outputs(), &cfg);
                ensure(layer_cycles(&p) + cfg.units as u64 == cycles, || {
                    "perf model disagrees with engine cycles".into()
                })?;
            }
            trials += 1;
        }
    }
    Ok(format!("{trials} batches"))
}

fn plan_fidelity() -> Check {
    let mut worst = 0.0f64;
    for raw in (-8 * 256)..=(8 * 256) {
        let x = Q15_16::from_raw(raw << 8);
        let exact = 1.0 / (1.0 + (-x.to_f64()).exp());
        let y = sigmoid_plan(x);
        worst = worst.max((y.to_f64() - exact).abs());
        let mirrored = sigmoid_plan(Q15_16::from_raw(-(raw << 8)));
        ensure(mirrored.raw() == Q15_16::ONE.raw() - y.raw(), || {
            format!("asymmetric at {x}")
        })?;
    }
    ensure(worst <= 0.02, || format!("max error {worst}"))?;
    Ok(format!("max error {worst:.5}"))
}

fn formulas() -> Check {
    let q = overhead_factor(3, 16);
    ensure((q - 4.0 / 3.0).abs() < 1e-12, || format!("q_overhead {q}"))?;
    let cfg = EngineConfig::default();
    let p = PerfParams::for_layer(784, 800, &cfg);
    let opt = n_opt(&p);
    ensure((opt - 12.66).abs() <= 0.01, || format!("n_opt {opt}"))?;
    let cycles = batch_layer_cycles(784, 800, &EngineConfig::batch(114, 16));
    ensure(cycles == 8 * 784 * 16 + 114, || format!("batch cycles {cycles}"))?;
    Ok(format!("q_overhead {q:.4}, n_opt {opt:.2}"))
}

/// Runs every check with the built-in golden stream.
pub fn run(seed: u64) -> SelftestReport {
    run_with_golden(seed, &EXAMPLE_ROW_GOLDEN)
}

/// Same as [`run`] but compares the codec against the given golden bytes.
pub fn run_with_golden(seed: u64, golden: &[u8]) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results: Vec<(&'static str, Check)> = vec![
        ("codec-golden", codec_golden(golden)),
        ("codec-round-trip", codec_round_trip(&mut rng)),
        ("sparse-equivalence", sparse_equivalence(&mut rng)),
        ("batch-invariance", batch_invariance(&mut rng)),
        ("plan-fidelity", plan_fidelity()),
        ("formulas", formulas()),
    ];
    SelftestReport {
        seed,
        checks: results
            .into_iter()
            .map(|(name, r)| match r {
                Ok(detail) => CheckResult {
                    name,
                    passed: true,
                    detail,
                },
                Err(detail) => CheckResult {
                    name,
                    passed: false,
                    detail,
                },
            })
            .collect(),
    }
}
