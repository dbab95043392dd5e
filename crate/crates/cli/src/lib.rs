//! Command-line front end for `tau-snn`.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use tau_snn::neuron::ResetMode;
use tau_snn::training::{Optimizer, Task};

mod commands;
pub mod output;
pub mod svg;

pub const DEFAULT_LADDER: &str = "2,4,8,16,32,64,128,256,512";

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing flags; exit code 2.
    Usage(String),
    /// Anything that went wrong while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<tau_snn::Error> for CliError {
    fn from(e: tau_snn::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: tau_snn::Error| e.to_string())
}

fn parse_reset(s: &str) -> Result<ResetMode, String> {
    s.parse().map_err(|e: tau_snn::Error| e.to_string())
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    s.parse().map_err(|e: tau_snn::Error| e.to_string())
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("tau must be a finite number >= 1, got {s}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a finite number > 0, got {s}"))
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a finite number >= 0, got {s}"))
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s}")),
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("expected a value in [0, 1), got {s}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tau-snn",
    version,
    about = "Train and analyse leaky-time-constant spiking networks"
)]
pub struct Cli {
    /// Worker threads for training and evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write a checkpoint plus its training history.
    Train(TrainArgs),
    /// Evaluate a checkpoint at one or more inference τ values.
    Evaluate(EvaluateArgs),
    /// Train across a τ ladder and evaluate every train/inference pair.
    Sweep(SweepArgs),
    /// Weight distributions or firing rates of a checkpoint.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Convert τ between the discrete and hardware (seconds) domains.
    Convert(ConvertArgs),
    /// Check which catalogued devices can host a task's τ.
    Devices(DevicesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// MNIST IDX directory, or a series CSV (file, or directory holding series.csv).
    #[arg(long, env = "TAU_SNN_DATA")]
    pub data: Option<PathBuf>,

    /// Use N generated examples instead of files on disk.
    #[arg(long, value_name = "N", value_parser = parse_count)]
    pub synthetic: Option<usize>,

    /// Seed for the synthetic generators.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,

    /// Series window length (also the number of time steps).
    #[arg(long, value_parser = parse_count)]
    pub window: Option<usize>,

    /// Series window stride; defaults to the window length.
    #[arg(long, value_parser = parse_count)]
    pub stride: Option<usize>,

    /// Keep only the first N training examples.
    #[arg(long, value_parser = parse_count)]
    pub train_limit: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Defaults to 10 for image tasks and 30 for the series task.
    #[arg(long)]
    pub epochs: Option<usize>,

    #[arg(long, default_value_t = 64, value_parser = parse_count)]
    pub batch: usize,

    #[arg(long, default_value_t = 1e-3, value_parser = parse_non_negative)]
    pub lr: f64,

    /// sgd or adam
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    pub optimizer: Optimizer,

    /// soft or hard
    #[arg(long, default_value = "soft", value_parser = parse_reset)]
    pub reset: ResetMode,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// static, dynamic or series
    #[arg(long, value_parser = parse_task)]
    pub task: Task,

    #[arg(long, value_parser = parse_tau)]
    pub tau: f64,

    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub hyper: HyperArgs,

    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Overrides the task recorded in the checkpoint.
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,

    /// Inference τ values; defaults to the checkpoint's τ.
    #[arg(long, value_delimiter = ',', value_parser = parse_tau)]
    pub taus: Vec<f64>,

    /// Also write accuracy.csv and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_task)]
    pub task: Task,

    #[arg(long, value_delimiter = ',', default_value = DEFAULT_LADDER, value_parser = parse_tau)]
    pub train_taus: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_value = DEFAULT_LADDER, value_parser = parse_tau)]
    pub infer_taus: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,

    /// Tolerance-window floor sits this far below the best matched-τ accuracy.
    #[arg(long, default_value_t = 0.05, value_parser = parse_fraction)]
    pub floor_margin: f64,

    /// Keep every trained model under OUT/models/.
    #[arg(long)]
    pub save_models: bool,

    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub hyper: HyperArgs,

    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Per-layer weight histograms and moments.
    Weights(WeightsArgs),
    /// Per-layer firing rates across inference τ values.
    Firing(FiringArgs),
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[arg(long, default_value_t = tau_snn::experiments::DEFAULT_HISTOGRAM_BINS)]
    pub bins: usize,

    #[arg(long, default_value_t = tau_snn::experiments::DEFAULT_HISTOGRAM_BOUND, value_parser = parse_positive)]
    pub bound: f64,

    /// Also draw one SVG bar chart per CSV.
    #[arg(long)]
    pub svg: bool,

    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FiringArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,

    #[arg(long, value_delimiter = ',', default_value = DEFAULT_LADDER, value_parser = parse_tau)]
    pub taus: Vec<f64>,

    #[arg(long)]
    pub svg: bool,

    #[arg(long, default_value = ".")]
    pub out: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Direction {
    /// Discrete τ to seconds.
    Hardware,
    /// Seconds to discrete τ.
    Software,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Discrete τ (to hardware) or seconds (to software).
    #[arg(long, value_parser = parse_positive, required_unless_present = "table")]
    pub tau: Option<f64>,

    #[arg(long, default_value_t = tau_snn::hwmap::DEFAULT_SAMPLE_RATE_HZ, value_parser = parse_positive)]
    pub rate: f64,

    #[arg(long, value_enum, default_value_t = Direction::Hardware)]
    pub to: Direction,

    /// Print the full discrete ladder in both domains as CSV.
    #[arg(long, conflicts_with = "tau")]
    pub table: bool,

    /// Also write conversion.csv and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DevicesArgs {
    #[arg(long, value_parser = parse_task)]
    pub task: Task,

    /// Device catalog CSV; the builtin catalog is used otherwise.
    #[arg(long)]
    pub catalog: Option<PathBuf>,

    /// Use the discrete-τ thresholds converted at this sample rate instead
    /// of the rounded seconds thresholds.
    #[arg(long, value_parser = parse_positive)]
    pub rate: Option<f64>,

    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    match commands::dispatch(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
