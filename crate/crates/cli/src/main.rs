//! `rasch-gauss`: simulate score sheets, reduce them to sufficient
//! statistics, build confidence ellipsoids, run the bound checks and
//! coverage experiments.

mod commands;
mod error;
mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};


#[derive(Debug, Parser)]
#[command(name = "rasch-gauss", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a mixture Rasch score sheet and write it as CSV.
    Simulate(SimulateArgs),
    /// Reduce a score sheet to (S, T, N) and check the reduction identities.
    Stats(StatsArgs),
    /// Confidence ellipsoid for the difficulties from a score sheet.
    Estimate(EstimateArgs),
    /// Run a bound-check suite (L4.1 … L5.4, all, coverage).
    Verify(VerifyArgs),
    /// Coverage simulation of the plug-in ellipsoid.
    Cover(CoverArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of items.
    #[arg(long, short)]
    pub m: usize,
    /// Number of subjects.
    #[arg(long, short)]
    pub n: usize,
    /// Radius R of the difficulty box.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Comma-separated difficulties summing to zero; drawn uniformly in the
    /// box when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    /// Ability distribution, e.g. gaussian:0,1 or mixture:0.5@gaussian:-1,1|0.5@logistic:1,1.
    #[arg(long, default_value = "gaussian:0,1")]
    pub ability: String,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Growth exponent for the advisory m^beta <= n check.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output CSV path; metadata goes to `<out>.json`.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Write an item header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothingArgs {
    /// Smoothing variance b; 0 inverts the integer column sums directly.
    #[arg(long, default_value_t = 1.0, conflicts_with = "alpha_exponent")]
    pub b: f64,
    /// Use b = n^a, checked against the admissible interval for --beta.
    #[arg(long, requires = "beta")]
    pub alpha_exponent: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub input: PathBuf,
    /// Confidence level.
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Growth exponent beta (m^beta <= n) for --alpha-exponent and the
    /// advisory rate check.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Seed of the smoothing noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail instead of pulling an out-of-range smoothed statistic back in.
    #[arg(long)]
    pub no_clamp: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite id: L4.1, L4.2, L4.3, L4.5, L4.6, L5.1, L5.2, L5.3, L5.4, all, coverage.
    pub suite: String,
    /// Random instances per numeric-constant check.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Replications for simulation-based checks.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Lattice state cap for exact conditional laws.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u128,
    /// Monte Carlo samples for TV estimates in d >= 4.
    #[arg(long, default_value_t = 200_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Run instances on the calling thread.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// d (multinomial histogram, stage-D statistic) or end-to-end-a.
    #[arg(long, default_value = "d")]
    pub mode: String,
    /// Smoothing variance for end-to-end runs; 0 inverts the integer sums.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long)]
    pub sequential: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Cover(a) => commands::cover(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
