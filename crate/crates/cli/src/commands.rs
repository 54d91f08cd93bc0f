use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dnn_accel::engine::{
    batch_layer_cycles, classify, infer_reference, infer_sparse, run_all, EngineConfig, Evaluator,
};
use dnn_accel::model::synth::{random_model, random_vector};
use dnn_accel::model::{load_csv_vectors, load_idx, save_model};
use dnn_accel::perf::{NetworkPerf, PerfParams, PerfReport, Sweep};
use dnn_accel::prune::{overhead_factor, prune_model, stream_file, TUPLES_PER_WORD};
use dnn_accel::{Dataset, NetworkModel, Q7_8};

use crate::{CliError, EngineKind, InferArgs, ModelSource, PerfArgs, PruneArgs, SelftestArgs};

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("IoFailure", format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Returns the model and a short description of where it came from.
fn load_source(src: &ModelSource, rng: &mut ChaCha8Rng) -> Result<(NetworkModel, String), CliError> {
    match (&src.model, &src.random_widths) {
        (Some(path), _) => Ok((dnn_accel::model::load_model(path)?, path.display().to_string())),
        (None, Some(widths)) => {
            if widths.len() < 2 || widths.contains(&0) {
                return Err(CliError::new(
                    "Usage",
                    "--random-widths needs at least two positive widths",
                ));
            }
            let model = random_model(rng, widths, 1.0);
            Ok((model, format!("random(seed={})", src.seed)))
        }
        (None, None) => Err(CliError::new("Usage", "one of --model or --random-widths is required")),
    }
}

fn load_dataset(a: &InferArgs, model: &NetworkModel, rng: &mut ChaCha8Rng) -> Result<(Dataset, String), CliError> {
    let width = model.input_width();
    let (data, origin) = if let Some(images) = &a.images {
        let data = load_idx(images, a.labels.as_deref(), a.pixel_scale)?;
        (data, images.display().to_string())
    } else if let Some(csv) = &a.csv {
        (load_csv_vectors(csv, width)?, csv.display().to_string())
    } else {
        let samples = (0..a.samples).map(|_| random_vector(rng, width, 1.0)).collect();
        let data = Dataset { samples, labels: None };
        (data, format!("random(seed={})", a.source.seed))
    };
    if data.is_empty() {
        return Err(CliError::new("EmptyDataset", "dataset is empty"));
    }
    if let Some(bad) = data.samples.iter().find(|s| s.len() != width) {
        return Err(CliError::new(
            "WidthMismatch",
            format!("samples have {} values, the model expects {width}", bad.len()),
        ));
    }
    Ok((data, origin))
}

fn engine_config(a: &InferArgs) -> Result<EngineConfig, CliError> {
    let hw = &a.hw;
    let tuples = hw.tuples.unwrap_or(match a.engine {
        EngineKind::Sparse => TUPLES_PER_WORD,
        _ => 1,
    });
    if a.engine == EngineKind::Sparse && hw.batch_size != 1 {
        return Err(CliError::new(
            "InvalidConfig",
            "the sparse engine processes one sample at a time; use --batch-size 1",
        ));
    }
    let cfg = EngineConfig {
        units: hw.units,
        tuples,
        batch_size: hw.batch_size,
        fpu_hz: hw.fpu_hz,
        mem_bytes_per_sec: hw.mem_bytes_per_sec,
        weight_bits: hw.weight_bits,
        ..EngineConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_outputs(outputs: &[Vec<Q7_8>]) -> String {
    let mut s = String::new();
    for (i, o) in outputs.iter().enumerate() {
        let _ = write!(s, "{i},{}", classify(o));
        for v in o {
            let _ = write!(s, ",{}", v.to_f64());
        }
        s.push('\n');
    }
    s
}

pub fn infer(a: InferArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.source.seed);
    let (model, model_origin) = load_source(&a.source, &mut rng)?;
    let (data, data_origin) = load_dataset(&a, &model, &mut rng)?;
    let cfg = engine_config(&a)?;

    let pruned = match (a.engine, a.delta) {
        (EngineKind::Sparse, None) => {
            return Err(CliError::new("InvalidConfig", "the sparse engine requires --delta"));
        }
        (EngineKind::Sparse, Some(delta)) => Some(prune_model(&model, delta)?),
        (_, Some(_)) => {
            return Err(CliError::new(
                "InvalidConfig",
                "--delta only applies to the sparse engine",
            ));
        }
        _ => None,
    };
    // The network the engine is expected to reproduce bit-exactly.
    let effective = pruned.as_ref().map_or_else(|| model.clone(), |p| p.densify());

    let evaluator = match (a.engine, &pruned) {
        (EngineKind::Sparse, Some(p)) => Evaluator::Sparse(p),
        (EngineKind::Batch, _) => Evaluator::Batch(&model),
        _ => Evaluator::Reference(&model),
    };
    let (outputs, cycles, diag) = run_all(evaluator, &data.samples, &cfg)?;

    let mut r = String::new();
    let _ = writeln!(r, "model={model_origin}");
    let _ = writeln!(r, "architecture={}", model.architecture());
    let _ = writeln!(r, "parameters={}", model.parameter_count());
    let _ = writeln!(r, "dataset={data_origin}");
    let _ = writeln!(r, "samples={}", data.len());
    let _ = writeln!(r, "outputs={}", outputs.len());
    let engine = match a.engine {
        EngineKind::Reference => "reference",
        EngineKind::Batch => "batch",
        EngineKind::Sparse => "sparse",
    };
    let _ = writeln!(
        r,
        "engine={engine} units={} tuples={} batch_size={} fpu_hz={} mem_bytes_per_sec={:.6} weight_bits={}",
        cfg.units, cfg.tuples, cfg.batch_size, cfg.fpu_hz, cfg.mem_bytes_per_sec, cfg.weight_bits
    );

    // Per-layer structure and per-pass cycles (one batch, or one sample on
    // the sparse engine).
    let sparse_layers = match &pruned {
        Some(p) => Some(infer_sparse(p, &data.samples[0], &cfg)?.layer_cycles),
        None => None,
    };
    let mut shapes = Vec::new();
    for (j, layer) in model.layers().iter().enumerate() {
        let q = pruned.as_ref().map_or(0.0, |p| p.layers()[j].q_prune());
        shapes.push((layer.inputs(), layer.outputs(), q));
        let _ = write!(
            r,
            "layer={j} shape={}x{} activation={} q_prune={q:.6}",
            layer.inputs(),
            layer.outputs(),
            layer.activation.name()
        );
        match (a.engine, &sparse_layers) {
            (EngineKind::Batch, _) => {
                let _ = write!(
                    r,
                    " cycles_per_batch={}",
                    batch_layer_cycles(layer.inputs(), layer.outputs(), &cfg)
                );
            }
            (EngineKind::Sparse, Some(lc)) => {
                let _ = write!(
                    r,
                    " cycles_per_sample={} formula_cycles={}",
                    lc[j].emulated, lc[j].formula
                );
            }
            _ => {}
        }
        r.push('\n');
    }
    if let Some(p) = &pruned {
        let _ = writeln!(r, "q_prune_overall={:.6}", p.overall_q_prune());
    }

    let _ = writeln!(r, "cycles_total={cycles}");
    let _ = writeln!(r, "macs_executed={}", diag.macs);
    let _ = writeln!(r, "accumulator_overflows={}", diag.overflows);
    if cycles > 0 {
        let per_sample = cycles as f64 / data.len() as f64;
        let seconds = cycles as f64 / cfg.fpu_hz;
        let _ = writeln!(r, "cycles_per_sample={per_sample:.3}");
        let _ = writeln!(
            r,
            "modeled_cycle_time_per_sample_ms={:.6}",
            seconds / data.len() as f64 * 1e3
        );
        let _ = writeln!(r, "modeled_cycle_gops={:.6}", diag.macs as f64 / seconds / 1e9);
    }

    let q_overhead = match a.engine {
        EngineKind::Sparse => overhead_factor(TUPLES_PER_WORD as u32, cfg.weight_bits),
        _ => 1.0,
    };
    let perf_cfg = EngineConfig {
        tuples: if a.engine == EngineKind::Reference {
            1
        } else {
            cfg.tuples
        },
        ..cfg
    };
    let perf = NetworkPerf::estimate(&shapes, &perf_cfg, data.len() as u64, q_overhead)?;
    let _ = writeln!(r, "modeled_time_per_sample_ms={:.6}", perf.per_sample_time * 1e3);
    let _ = writeln!(r, "modeled_gops={:.6}", perf.gops);
    match perf.effective_gops {
        Some(g) => {
            let _ = writeln!(r, "modeled_effective_gops={g:.6}");
        }
        None => {
            let _ = writeln!(r, "modeled_effective_gops=none");
        }
    }
    let bounds: Vec<&str> = perf.layers.iter().map(|l| l.bound.as_str()).collect();
    let _ = writeln!(r, "modeled_bound={}", bounds.join(","));

    // Self-check: every engine must match the reference on the network it
    // implements.
    let check = match a.engine {
        EngineKind::Reference => None,
        EngineKind::Batch => Some("batch-invariance"),
        EngineKind::Sparse => Some("sparse-equivalence"),
    };
    let mut mismatch = None;
    if let Some(name) = check {
        for (i, (x, y)) in data.samples.iter().zip(&outputs).enumerate() {
            if infer_reference(&effective, x)? != *y {
                mismatch = Some(i);
                break;
            }
        }
        let status = match mismatch {
            None => "pass".to_string(),
            Some(i) => format!("fail sample={i}"),
        };
        let _ = writeln!(r, "self_check={name} {status}");
    }

    match &data.labels {
        Some(labels) => {
            let correct = outputs.iter().zip(labels).filter(|(o, &l)| classify(o) == l).count();
            let _ = writeln!(
                r,
                "accuracy={:.6} correct={correct} total={}",
                correct as f64 / outputs.len() as f64,
                outputs.len()
            );
        }
        None => {
            let _ = writeln!(r, "accuracy=none (no labels)");
        }
    }

    print!("{r}");
    if let Some(path) = &a.out {
        write_file(path, &r)?;
    }
    if let Some(path) = &a.outputs_csv {
        write_file(path, fmt_outputs(&outputs))?;
    }
    match (check, mismatch) {
        (Some(name), Some(i)) => Err(CliError::failed_check(
            "SelfCheckFailed",
            format!("{name} mismatch at sample {i}"),
        )),
        _ => Ok(()),
    }
}

pub fn prune(a: PruneArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.source.seed);
    let (model, origin) = load_source(&a.source, &mut rng)?;
    let pruned = prune_model(&model, a.delta)?;
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;

    let mut s = String::new();
    let _ = writeln!(s, "model={origin}");
    let _ = writeln!(s, "architecture={}", model.architecture());
    let _ = writeln!(s, "delta={}", a.delta);
    let (mut nonzero, mut stored) = (0usize, 0usize);
    for (j, layer) in pruned.layers().iter().enumerate() {
        let path = a.out.join(format!("layer{j}.nnsp"));
        stream_file::save(layer, &path)?;
        nonzero += layer.nonzero_weights();
        stored += layer.stored_tuples();
        let _ = writeln!(
            s,
            "layer={j} file={} shape={}x{} activation={} q_prune={:.6} stored_q_prune={:.6} nonzero={} stored_tuples={} filler_tuples={} words={}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or_default(),
            layer.input_width(),
            layer.row_count(),
            layer.activation().name(),
            layer.q_prune(),
            layer.stored_q_prune(),
            layer.nonzero_weights(),
            layer.stored_tuples(),
            layer.filler_tuples(),
            layer.word_count()
        );
    }
    let _ = writeln!(s, "q_prune_overall={:.6}", pruned.overall_q_prune());
    let _ = writeln!(
        s,
        "tuple_overhead={}",
        if nonzero == 0 {
            "none".to_string()
        } else {
            format!("{:.6}", stored as f64 / nonzero as f64)
        }
    );
    let _ = writeln!(
        s,
        "q_overhead={:.6}",
        overhead_factor(TUPLES_PER_WORD as u32, EngineConfig::default().weight_bits)
    );
    let dense_path = a.out.join("pruned.nnsm");
    save_model(&pruned.densify(), &dense_path)?;
    let _ = writeln!(
        s,
        "dense_model={}",
        dense_path.file_name().and_then(|n| n.to_str()).unwrap_or_default()
    );

    write_file(&a.out.join("summary.txt"), &s)?;
    print!("{s}");
    Ok(())
}

fn parse_sweep(arg: &str) -> Result<(String, Vec<f64>), CliError> {
    let bad = |why: &str| CliError::new("InvalidSweep", format!("{arg:?}: {why}"));
    let (axis, values) = arg.split_once('=').ok_or_else(|| bad("expected axis=values"))?;
    let axis = axis.trim().to_string();
    let values = values.trim();
    let parsed = if let Some((lo, hi)) = values.split_once("..") {
        let hi = hi.trim_start_matches('=');
        let lo: u64 = lo.trim().parse().map_err(|_| bad("range bounds must be integers"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad("range bounds must be integers"))?;
        if lo > hi || hi - lo > 1_000_000 {
            return Err(bad("empty or oversized range"));
        }
        (lo..=hi).map(|v| v as f64).collect()
    } else {
        values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("values must be numbers")))
            .collect::<Result<Vec<_>, _>>()?
    };
    if parsed.is_empty() {
        return Err(bad("no values"));
    }
    Ok((axis, parsed))
}

pub fn perf(a: PerfArgs) -> Result<(), CliError> {
    let base = PerfParams {
        inputs: a.inputs,
        outputs: a.outputs,
        samples: a.samples,
        batch_size: a.batch_size,
        units: a.units,
        tuples: a.tuples,
        fpu_hz: a.fpu_hz,
        mem_bytes_per_sec: a.mem_bytes_per_sec,
        weight_bits: a.weight_bits,
        q_prune: a.q_prune,
        q_overhead: a.q_overhead,
    };
    base.validate()?;
    let sweep = match &a.sweep {
        Some(arg) => {
            let (axis, values) = parse_sweep(arg)?;
            Sweep::run(&base, &axis, &values)?
        }
        None => {
            let report = PerfReport::evaluate(&base)?;
            if a.json {
                println!("{}", report.to_json()?);
            } else {
                print!("{}", report.to_key_value());
            }
            Sweep::run(&base, "n", &[base.batch_size as f64])?
        }
    };
    if a.sweep.is_some() {
        print!("{}", sweep.to_table());
        let d = &sweep.diagnostics;
        println!(
            "t_proc_non_increasing={} t_calc_non_increasing={} first_compute_bound={}",
            d.t_proc_non_increasing,
            d.t_calc_non_increasing,
            d.first_compute_bound.map_or("none".to_string(), |v| v.to_string())
        );
    }
    if let Some(path) = &a.out {
        write_file(path, sweep.to_csv()?)?;
    }
    Ok(())
}

pub fn selftest(a: SelftestArgs) -> Result<(), CliError> {
    let report = dnn_accel::selftest::run(a.seed);
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        Err(CliError::failed_check(
            "SelftestFailed",
            format!("failed checks: {}", names.join(",")),
        ))
    }
}
