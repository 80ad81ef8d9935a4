use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

/// Bayesian spatial stochastic-frontier estimation of hidden populations.
#[derive(Parser, Debug)]
#[command(name = "hiddenpop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a panel on a queen-contiguity grid, with its latent truth.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a panel and store the posterior draws.
    Fit(FitArgs),
    /// Derive intervals, coverage, MAPE and uncaptured shares from draws.
    Analyze(AnalyzeArgs),
    /// Standardized incidence ratios and hot-spot exceedance probabilities.
    Sir(SirArgs),
}

#[derive(Args, Debug)]
pub struct Common {
    /// Settings file (.toml, or .json including a previous run's manifest);
    /// flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $HIDDENPOP_OUT/<command>, or
    /// ./hiddenpop-out/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Grid size as ROWSxCOLS, e.g. 7x7.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target (σ_η + σ_u)/σ_ε; σ_ε is derived from it.
    #[arg(long, conflicts_with = "sigma_eps")]
    pub lambda: Option<f64>,
    /// Draw ε from a scaled Student-t with this many degrees of freedom.
    #[arg(long = "student-t-df")]
    pub student_t_df: Option<f64>,
    /// True coefficients on z and its spatial lag, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long)]
    pub sigma_alpha: Option<f64>,
    #[arg(long)]
    pub sigma_eta: Option<f64>,
    #[arg(long)]
    pub sigma_u: Option<f64>,
    #[arg(long)]
    pub sigma_eps: Option<f64>,
    #[arg(long)]
    pub sigma_v: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Panel CSV with header `region,time,y,x1..xK`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Edge list `i j [w]`.
    #[arg(long, conflicts_with = "grid")]
    pub adjacency: Option<PathBuf>,
    /// Queen-contiguity grid ROWSxCOLS matching the panel's regions.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Re-center the spatial field to mean zero after each sweep.
    #[arg(long)]
    pub center_car: bool,
    /// Degrees of freedom of the σ²_v update: `nt` (N·T + N̄) or `n` (N + N̄).
    #[arg(long)]
    pub car_df: Option<String>,
    /// Also write the draws as a wide CSV.
    #[arg(long)]
    pub draws_csv: bool,
    /// Credibility level of the HDIs in summary.csv.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub mh_step_alpha: Option<f64>,
    #[arg(long)]
    pub mh_step_eps: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Binary draws file written by `fit`.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Panel CSV the draws were fitted to (observed counts).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Truth sidecar written by `simulate`; enables coverage and MAPE.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Credibility levels for coverage, comma separated [default: 0.90,0.95,0.99].
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub by_region: bool,
    #[arg(long)]
    pub by_period: bool,
    /// Use the per-draw absolute percentage error instead of the error of
    /// the posterior-mean estimate.
    #[arg(long)]
    pub per_draw_mape: bool,
    /// Graph used for the spatial share of variability.
    #[arg(long, conflicts_with = "grid")]
    pub adjacency: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<String>,
    /// Seed for the Beta coverage draws.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta_draws: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SirArgs {
    /// CSV with header `region,time,count,population`.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Tier thresholds, comma separated [default: 0.90,0.95,0.99].
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Gamma prior shape.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Gamma prior rate.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Sir(a) => commands::sir(a),
    };
    match result {
        Ok(manifest) => {
            println!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
