//! `vpfp`: batch driver for spectra, kernel probes, frequency hierarchies,
//! Green's-function assembly, nonlinear runs and the acceptance suite.
//!
//! Exit codes: 0 success, 1 a checked criterion failed, 2 usage or
//! configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "vpfp", version, about = "Spectral Green's-function toolkit for the Vlasov-Poisson-Fokker-Planck system")]
pub struct Cli {
    /// JSON configuration file (one optional section per subcommand).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving data files and the run manifest.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Seed for randomized sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Reduced grids (results are marked "smoke").
    #[arg(long, global = true)]
    pub quick: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum of B(ξ) over a |ξ| grid, spectral gap and fluid dispersion.
    Spectrum(SpectrumArgs),
    /// Tabulate the exact damped/undamped Fokker–Planck kernels.
    KernelProbe(KernelProbeArgs),
    /// Low-frequency hierarchy norms and sum identity.
    Lowfreq(LadderArgs),
    /// High-frequency hierarchy norms and sum identity.
    Highfreq(LadderArgs),
    /// Reconstruct physical-space Green's-function profiles and fit exponents.
    Assemble(AssembleArgs),
    /// Nonlinear run: trajectory, decay report and Picard contraction.
    Simulate(SimulateArgs),
    /// Run acceptance criteria and report pass/fail.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub basis_degree: Option<usize>,
    #[arg(long)]
    pub xi_min: Option<f64>,
    #[arg(long)]
    pub xi_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KernelProbeArgs {
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// `g0` or `g1`.
    #[arg(long)]
    pub kernel: Option<String>,
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    #[arg(long)]
    pub basis_degree: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Comma-separated |ξ| values.
    #[arg(long, value_delimiter = ',')]
    pub xi: Option<Vec<f64>>,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    #[arg(long)]
    pub t: Option<f64>,
    /// `low`, `high`, `full` or `remainder:K`.
    #[arg(long)]
    pub part: Option<String>,
    #[arg(long)]
    pub x_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub decay_power: Option<u32>,
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Data with vanishing total charge.
    #[arg(long)]
    pub neutral: bool,
    /// Switch the nonlinearity off and compare with the mode semigroup.
    #[arg(long)]
    pub linear_only: bool,
    #[arg(long)]
    pub picard_iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// all | spectrum | kernel | lowfreq | highfreq | assembly | nonlinear
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Comma-separated criterion numbers (overrides --suite).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u8>>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Criterion(String),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("VPFP_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("VPFP_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("VPFP_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().map_err(Failure::Usage).and_then(|_| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Criterion(msg)) => {
            eprintln!("criterion failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
