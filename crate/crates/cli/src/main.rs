//! Command-line runner for the coupling and transport experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coupling_lab::Error;

#[derive(Debug, Parser)]
#[command(name = "coupling-lab", version, about = "Reflection couplings and Langevin transport maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario TOML file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "n-paths", global = true)]
    pub n_paths: Option<usize>,
    /// Tolerance of the deterministic run-level checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Profile constants for κ_U and κ̄.
    Constants,
    /// Closed-form gradient, Hessian and Lipschitz bounds.
    Bounds,
    /// Reflection coupling and contraction curves.
    Couple,
    /// Monte-Carlo value function, gradient, Hessian and HJB residuals.
    Value,
    /// Flow maps, transport map, pushforward and Lipschitz report.
    Transport,
    /// The acceptance suite.
    Verify {
        /// Reduced sample sizes.
        #[arg(long)]
        quick: bool,
        /// Skip the second run used for the determinism criterion.
        #[arg(long)]
        no_rerun: bool,
        /// Run only these criteria (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

/// Why a run did not succeed, mapped to the exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Assumption(String),
    Numerical(String),
    Acceptance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Assumption(_) => 3,
            Failure::Numerical(_) => 4,
            Failure::Acceptance(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Assumption(m) | Failure::Numerical(m) | Failure::Acceptance(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config { .. } | Error::Io(_) => Failure::Config(msg),
            Error::MissingConstant(_) | Error::NotInClassK(_) => Failure::Assumption(msg),
            _ => Failure::Numerical(msg),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("COUPLING_LAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("COUPLING_LAB_THREADS: expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("COUPLING_LAB_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
