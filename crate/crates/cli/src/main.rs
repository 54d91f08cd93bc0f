//! `dnnaccel`: run models through the emulated accelerator, prune them into
//! packed streams, and query the performance model.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dnn_accel::engine::DEFAULT_MEM_BYTES_PER_SEC;
use dnn_accel::model::dataset::DatasetError;
use dnn_accel::perf::PerfError;
use dnn_accel::{EngineError, ModelError, PruneError};

#[derive(Debug, Parser)]
#[command(
    name = "dnnaccel",
    version,
    about = "Fixed-point FPGA accelerator emulator for fully-connected networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a dataset through one of the engines.
    Infer(InferArgs),
    /// Prune a model and write one packed stream per layer.
    Prune(PruneArgs),
    /// Evaluate the analytical performance model, optionally as a sweep.
    Perf(PerfArgs),
    /// Run the embedded invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineKind {
    Reference,
    Batch,
    Sparse,
}

/// Where the network comes from: a container file or a seeded random model.
#[derive(Debug, Args)]
struct ModelSource {
    /// NNSM model container.
    #[arg(long, conflicts_with = "random_widths")]
    model: Option<PathBuf>,
    /// Generate a random model with these layer widths, e.g. `16,32,10`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    random_widths: Option<Vec<usize>>,
    /// Seed for generated models and samples.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct HardwareArgs {
    /// Processing units `m`.
    #[arg(long, default_value_t = 114)]
    units: usize,
    /// MACs per unit and cycle `r` (defaults to 1 for batch, 3 for sparse).
    #[arg(long)]
    tuples: Option<usize>,
    /// Batch size `n`.
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long, default_value_t = 100e6)]
    fpu_hz: f64,
    #[arg(long, default_value_t = DEFAULT_MEM_BYTES_PER_SEC)]
    mem_bytes_per_sec: f64,
    #[arg(long, default_value_t = 16)]
    weight_bits: u32,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[command(flatten)]
    source: ModelSource,
    /// IDX image file.
    #[arg(long, conflicts_with = "csv")]
    images: Option<PathBuf>,
    /// IDX label file matching `--images`.
    #[arg(long, requires = "images")]
    labels: Option<PathBuf>,
    /// CSV feature vectors, optionally with a trailing label column.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Multiplier applied to raw IDX pixels before quantization.
    #[arg(long, default_value_t = 1.0 / 255.0)]
    pixel_scale: f64,
    /// Number of random samples when no dataset is given.
    #[arg(long, default_value_t = 32)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = EngineKind::Reference)]
    engine: EngineKind,
    /// Pruning threshold; required by the sparse engine.
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    hw: HardwareArgs,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-sample outputs as CSV.
    #[arg(long)]
    outputs_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PruneArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long)]
    delta: f64,
    /// Output directory for `layer{j}.nnsp`, `pruned.nnsm` and `summary.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PerfArgs {
    /// `s_j`
    #[arg(long, default_value_t = 784)]
    inputs: u64,
    /// `s_{j+1}`
    #[arg(long, default_value_t = 800)]
    outputs: u64,
    /// `N`
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    batch_size: u64,
    #[arg(long, default_value_t = 114)]
    units: u64,
    #[arg(long, default_value_t = 1)]
    tuples: u64,
    #[arg(long, default_value_t = 100e6)]
    fpu_hz: f64,
    #[arg(long, default_value_t = DEFAULT_MEM_BYTES_PER_SEC)]
    mem_bytes_per_sec: f64,
    #[arg(long, default_value_t = 16.0)]
    weight_bits: f64,
    #[arg(long, default_value_t = 0.0)]
    q_prune: f64,
    #[arg(long, default_value_t = 1.0)]
    q_overhead: f64,
    /// `axis=v1,v2,...` or `axis=lo..hi` (inclusive, step 1).
    #[arg(long)]
    sweep: Option<String>,
    /// Write the sweep (or single report) as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the single-point report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = dnn_accel::selftest::DEFAULT_SEED)]
    seed: u64,
}

/// Error carrying the stable code printed on the `error:` line.
#[derive(Debug)]
pub struct CliError {
    code: &'static str,
    message: String,
    exit: u8,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: 2,
        }
    }

    /// A check that ran and failed, as opposed to bad input.
    pub fn failed_check(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit: 1,
            ..Self::new(code, message)
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self.message.replace('\n', " ");
        write!(f, "error: code={} message={flat}", self.code)
    }
}

macro_rules! coded_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(e.code(), e.to_string())
            }
        }
    )*};
}
coded_error!(ModelError, DatasetError, EngineError, PruneError, PerfError);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", CliError::new("Usage", first));
            eprintln!("{}", e.render());
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Infer(a) => commands::infer(a),
        Command::Prune(a) => commands::prune(a),
        Command::Perf(a) => commands::perf(a),
        Command::Selftest(a) => commands::selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit)
        }
    }
}
