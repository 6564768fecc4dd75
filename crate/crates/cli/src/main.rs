//! `blowuplab`: batch runner for the verification suite.
//!
//! Exit codes: 0 pass, 1 invariant failure, 2 usage or config error,
//! 3 quadrature non-convergence, 4 fit verification failure,
//! 5 hypothesis unmet.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "blowuplab", version, about = "Numerical checks of two-bubble boundary concentration in a critical 4D Neumann system")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also emit the JSON report: to stdout, or to PATH if given.
    #[arg(long, global = true, num_args = 0..=1, value_name = "PATH")]
    json: Option<Option<PathBuf>>,
    /// Relative quadrature tolerance override.
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    /// Comma-separated lambda values, overriding the config grid.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Worker threads (falls back to BLOWUPLAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bessel K1 and correction profile invariants.
    VerifySpecialfn {
        #[arg(long, default_value_t = 1e-6)]
        rmin: f64,
        #[arg(long, default_value_t = 50.0)]
        rmax: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Boundary scan of the mean curvature and its strict maxima.
    Curvature,
    /// Lambda-grid scaling of one quantity.
    Scaling {
        #[arg(long, value_enum)]
        quantity: Quantity,
    },
    /// Fit c0, c1, c2 of the single-bubble energy expansion.
    FitConstants,
    /// Predict blow-up points and concentration rates.
    Predict,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Error,
    Coupling,
    Q1,
    Wnorm,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Error => "error",
            Quantity::Coupling => "coupling",
            Quantity::Q1 => "q1",
            Quantity::Wnorm => "wnorm",
        }
    }
}

/// A non-zero outcome with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(2, message)
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(n) = flag {
        return if n > 0 { Ok(Some(n)) } else { Err(Failure::usage("--threads must be positive")) };
    }
    match std::env::var("BLOWUPLAB_THREADS") {
        Ok(s) if !s.trim().is_empty() => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::usage(format!("BLOWUPLAB_THREADS = {s:?} is not a positive integer"))),
        },
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = thread_count(cli.global.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    if let Some(t) = cli.global.tol_rel {
        if !(t > 0.0 && t < 1.0) {
            return Err(Failure::usage(format!("--tol-rel {t} must lie in (0, 1)")));
        }
    }
    let g = &cli.global;
    match cli.command {
        Command::VerifySpecialfn { rmin, rmax, points } => commands::verify_specialfn(g, rmin, rmax, points),
        Command::Curvature => commands::curvature(g),
        Command::Scaling { quantity } => commands::scaling(g, quantity),
        Command::FitConstants => commands::fit_constants(g),
        Command::Predict => commands::predict(g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("blowuplab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
