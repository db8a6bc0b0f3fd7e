//! `stratum`: feature extraction, source selection, transfer and evaluation
//! from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "stratum", version, about = "Stratified transfer learning for cross-position activity recognition")]
struct Cli {
    /// Run configuration file (flat TOML; see `stratum config dump`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every randomized step; overrides the configuration and STRATUM_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Window a recording and write its feature matrix.
    Extract(ExtractArgs),
    /// Generate seeded synthetic domains.
    Synth(SynthArgs),
    /// Rank candidate sources against an unlabeled target.
    SelectSource(SelectArgs),
    /// Predict target labels with a transfer method.
    Transfer(TransferArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Run every method on a labeled task and write one report per method.
    Experiment(ExperimentArgs),
    /// Configuration utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand, Debug)]
enum ConfigAction {
    /// Print the effective configuration with every key.
    Dump,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Recording CSV with header `t,<channels...>,label`.
    #[arg(long)]
    input: PathBuf,
    /// Feature matrix CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated channel names, in order.
    #[arg(long, value_delimiter = ',', required = true)]
    schema: Vec<String>,
    /// Samples per second; inferred from `t` when omitted.
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    window_seconds: Option<f64>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    position: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    samples_per_class: usize,
    /// Comma-separated per-domain shift magnitudes.
    #[arg(long, value_delimiter = ',', default_value = "0,2")]
    shifts: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Directory receiving `domain<k>.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Distance {
    Stratified,
    Global,
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// Labeled source feature matrix; repeat for each candidate.
    #[arg(long = "source", required = true)]
    sources: Vec<PathBuf>,
    /// Target feature matrix; any label column is ignored.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value_t = Distance::Stratified)]
    distance: Distance,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    StlSat,
    Tca,
    Pca,
    #[value(name = "source-only-1nn")]
    SourceOnly1nn,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[arg(long)]
    source: PathBuf,
    /// Target feature matrix; any label column is ignored.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::StlSat)]
    method: MethodArg,
    /// Subspace dimension.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// RBF bandwidth; 0 selects the median heuristic.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Predicted labels CSV (`row,label`).
    #[arg(long)]
    output: PathBuf,
    /// Per-iteration trace CSV (stl-sat only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Labeled copy of the target used only to fill the trace accuracy column.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// CSV with a `label` column of predictions.
    #[arg(long)]
    predictions: PathBuf,
    /// CSV with a `label` column of ground truth.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Aggregate CSV to append one row to.
    #[arg(long)]
    emit: Option<PathBuf>,
    #[arg(long, default_value = "task")]
    task: String,
    #[arg(long, default_value = "stl-sat")]
    method: String,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    source: PathBuf,
    /// Labeled target; labels are used only for scoring.
    #[arg(long)]
    target: PathBuf,
    /// Comma-separated methods (default: all).
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    /// Number of consecutive seeds starting at the configured seed.
    #[arg(long, default_value_t = 1)]
    repeats: u64,
    #[arg(long, default_value = "task")]
    task: String,
    /// Directory for per-run JSON reports.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    emit: Option<PathBuf>,
    /// Record wall-clock time in reports.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
