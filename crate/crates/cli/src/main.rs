//! `rrest`: command-line harness for reduced-rank estimation studies.
//!
//! Subcommands:
//! * `reproduce`: generate an ill-conditioned scenario and write the full
//!   table/certificate/MSE bundle for it;
//! * `sweep`: evaluate the per-index gain/loss terms over a grid and emit
//!   plot-ready CSV plus the positivity boundary;
//! * `certify`: evaluate the robustness certificates for a pair read from
//!   JSON, with the verdict reflected in the exit code;
//! * `validate`: run the property suites (closed forms, bounds, ensembles)
//!   with a configurable trial budget.
//!
//! Exit codes: 0 success (for `certify`: the full-rank filter is certified
//! worse), 1 inconclusive certificate or failed validation, 2 scenario
//! generation exhausted, 3 I/O failure, 4 separation gate failed,
//! 5 malformed input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod certify;
mod out;
mod reproduce;
mod sweep;
mod validate;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INCONCLUSIVE: u8 = 1;
pub const EXIT_GENERATION: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_RHO_GATE: u8 = 4;
pub const EXIT_PARSE: u8 = 5;

#[derive(Parser)]
#[command(name = "rrest", version, about = "Reduced-rank estimation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write tables, certificates, and MSE values.
    Reproduce(ReproduceArgs),
    /// Evaluate the gain/loss landscape over a grid.
    Sweep(SweepArgs),
    /// Evaluate robustness certificates for a pair file.
    Certify(CertifyArgs),
    /// Run a validation suite.
    Validate(ValidateArgs),
}

#[derive(Args)]
pub struct ReproduceArgs {
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Observation dimension.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Signal dimension.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Smallest-singular-value acceptance cap.
    #[arg(long, default_value_t = 0.01)]
    pub gamma_min_cap: f64,
    /// Minimum condition number.
    #[arg(long, default_value_t = 1e3)]
    pub cond_min: f64,
    /// Per-entry standard deviation of the perturbation.
    #[arg(long, default_value_t = 0.01)]
    pub delta_sd: f64,
    /// Separation gap used for classification.
    #[arg(long, default_value_t = 1.75)]
    pub kappa: f64,
    /// Rejection budget for the generator.
    #[arg(long, default_value_t = 100_000)]
    pub max_rejects: u64,
    /// Monte Carlo confirmation sample count.
    #[arg(long, default_value_t = 200_000)]
    pub mc_samples: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "verbatim")]
pub enum TermChoice {
    A,
    B,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Which term's positivity boundary to trace.
    #[arg(long, value_enum)]
    pub term: TermChoice,
    /// Grid axis as min,max,steps; give once for both axes or twice for
    /// the gamma and sigma axes in that order.
    #[arg(long, value_parser = parse_grid, required = true)]
    pub grid: Vec<GridAxis>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CertifyArgs {
    /// Pair JSON file.
    #[arg(long)]
    pub pair: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum SuiteChoice {
    Bounds,
    Mse,
    Ensembles,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Which property suite to run.
    #[arg(long, value_enum)]
    pub suite: SuiteChoice,
    /// Trial budget.
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Suite seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for failure reproducers (and tail-statistics CSV).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

fn parse_grid(raw: &str) -> Result<GridAxis, String> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err("expected min,max,steps".into());
    }
    let min: f64 = parts[0].trim().parse().map_err(|e| format!("min: {e}"))?;
    let max: f64 = parts[1].trim().parse().map_err(|e| format!("max: {e}"))?;
    let steps: usize = parts[2].trim().parse().map_err(|e| format!("steps: {e}"))?;
    if min <= 0.0 || max <= min || steps < 2 || !min.is_finite() || !max.is_finite() {
        return Err("need 0 < min < max and steps >= 2".into());
    }
    Ok(GridAxis { min, max, steps })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Reproduce(args) => reproduce::run(&args),
        Command::Sweep(args) => sweep::run(&args),
        Command::Certify(args) => certify::run(&args),
        Command::Validate(args) => validate::run(&args),
    };
    ExitCode::from(code)
}
