//! `disctree` command-line tool: estimate, analyse and evaluate discrepancy-based
//! density partitions from CSV samples.

mod commands;
mod error;
mod ingest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use disctree::{DiscrepancyMode, EstimatorConfig, SplitDecisionConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "disctree", version, about = "Discrepancy-driven piecewise-constant density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a partition; writes partition.json and report.json.
    Estimate(DataArgs),
    /// Detect modes of the estimate; writes modes.json.
    Modes(DataArgs),
    /// Build the level-set tree; writes levelset.dot and levelset.json.
    Tree(DataArgs),
    /// Run an error-vs-sample-size experiment; writes results.csv and summary.json.
    Eval(EvalArgs),
    /// Draw points from a synthetic mixture; writes samples.csv.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV of samples, one row per point.
    #[arg(long, required_unless_present = "partition")]
    input: Option<PathBuf>,
    /// Reuse a partition.json instead of estimating (modes and tree only).
    #[arg(long, conflicts_with = "input")]
    partition: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Min-max map every column onto [0, 1] before estimating.
    #[arg(long)]
    rescale: bool,
    /// Keep at most this many decision records in report.json.
    #[arg(long)]
    max_leaves_report: Option<usize>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DiscMode {
    Exact,
    Grid,
    L2,
    Auto,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Bins per dimension of the gap grid.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Split without testing once the threshold falls below this.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pseudo_count: f64,
    #[arg(long, default_value_t = 50)]
    max_depth: usize,
    #[arg(long, value_enum, default_value = "auto")]
    disc_mode: DiscMode,
    #[arg(long, default_value_t = disctree::discrepancy::DEFAULT_GRID_RESOLUTION)]
    grid_res: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EstimatorArgs {
    fn config(&self) -> CliResult<EstimatorConfig> {
        let mode = match self.disc_mode {
            DiscMode::Exact => DiscrepancyMode::Exact,
            DiscMode::Grid => DiscrepancyMode::Grid(self.grid_res),
            DiscMode::L2 => DiscrepancyMode::L2Surrogate,
            DiscMode::Auto => DiscrepancyMode::Auto,
        };
        let cfg = EstimatorConfig {
            m: self.m,
            pseudo_count: self.pseudo_count,
            max_depth: self.max_depth,
            split: SplitDecisionConfig {
                theta: self.theta,
                epsilon: self.epsilon,
                mode,
                grid_resolution: self.grid_res,
                ..SplitDecisionConfig::default()
            },
            seed: self.seed,
            ..EstimatorConfig::default()
        };
        cfg.validate().map_err(|e| CliError::input(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Slope,
    Hellinger,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mixture {
    /// Four Gaussians with covariance 0.01 I at the corners (1/4 | 3/4).
    FourCorners,
    /// Equal mix of Beta(15,5) and Beta(5,15) products.
    BetaBimodal,
    Uniform,
    /// Correlated Gaussian at the center (2-D only).
    TiltedGaussian,
    /// Two correlated Gaussians (2-D only).
    TwinGaussians,
    /// Three skewed beta products (2-D only).
    BetaTriple,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// Target distribution; defaults to beta-bimodal for slope, four-corners otherwise.
    #[arg(long, value_enum)]
    mixture: Option<Mixture>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [1_000usize, 10_000, 100_000])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    replicas: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, value_enum, default_value = "four-corners")]
    mixture: Mixture,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DISCTREE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(args) => commands::estimate(args),
        Command::Modes(args) => commands::modes(args),
        Command::Tree(args) => commands::tree(args),
        Command::Eval(args) => commands::eval(args),
        Command::Sample(args) => commands::sample(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("disctree: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
