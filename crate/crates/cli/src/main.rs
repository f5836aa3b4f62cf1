//! `dmd` — fit surrogate models to trajectory CSV files, predict states at
//! arbitrary indexes, inspect spectra, and generate demo data.
//!
//! Exit codes: 0 on success, 2 on input errors (malformed CSV, irregular
//! spacing, bad arguments), 3 on numerical failures. Results go to stdout,
//! warnings and notes to stderr.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dmd",
    version,
    about = "Linear surrogate models for sampled dynamical systems"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a model from one or more trajectory CSV files.
    Fit(FitArgs),
    /// Predict states from a fitted model file.
    Predict(PredictArgs),
    /// Print the eigenvalue table of a model; optionally draw it as SVG.
    Spectrum(SpectrumArgs),
    /// Generate synthetic trajectory data.
    Demo(DemoArgs),
}

#[derive(Args)]
pub struct FitArgs {
    /// Trajectory CSV file(s); repeat for multiple runs.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Rank truncation: fixed:R, tol:T, or energy:E.
    #[arg(long, default_value = "tol:1e-10")]
    pub rank: String,
    /// Mode formulation: exact, projected, or auto.
    #[arg(long, default_value = "auto")]
    pub modes: String,
    /// Observable dictionary: identity; monomial:D with optional ,const
    /// and ,std flags; or monomials:E1;E2;... with comma-separated
    /// exponents per observable.
    #[arg(long, default_value = "identity")]
    pub dict: String,
    /// Keep only rows at these original-unit indexes (comma separated).
    #[arg(long = "select-indices")]
    pub select_indices: Option<String>,
    /// Where to write the fitted model.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Fitted model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Indexes to predict at, in original units (comma separated).
    #[arg(long)]
    pub at: String,
    /// Prediction mode: discrete (integer steps) or continuous.
    #[arg(long, default_value = "discrete")]
    pub mode: String,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Fitted model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Also render the spectrum to this SVG file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct DemoArgs {
    /// System family: linear, continuous, randomwalk, or slowmanifold.
    pub family: String,
    /// Diagonal eigenvalues for `linear` (comma separated).
    #[arg(long)]
    pub eigs: Option<String>,
    /// Full generator matrix, rows separated by `;`: "0,1;-1,-0.1".
    #[arg(long)]
    pub matrix: Option<String>,
    /// Noise level for `randomwalk`.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Noise seed for `randomwalk`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Slow-manifold lambda.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Slow-manifold mu.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Initial state (comma separated); defaults to all ones.
    #[arg(long)]
    pub x0: Option<String>,
    /// Number of transitions (samples = steps + 1).
    #[arg(long)]
    pub steps: usize,
    /// Sampling interval in original units.
    #[arg(long, default_value_t = 1.0)]
    pub delta_k: f64,
    /// Original-units index of the first sample.
    #[arg(long, default_value_t = 0.0)]
    pub start_index: f64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Failures carry the exit code mandated for their class.
pub enum CliError {
    /// Malformed input: bad CSV, bad arguments, unreadable files. Exit 2.
    Input(String),
    /// The numerics refused: rank, convergence, or degenerate spectra. Exit 3.
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Predict(args) => commands::predict(&args),
        Command::Spectrum(args) => commands::spectrum(&args),
        Command::Demo(args) => commands::demo(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
