//! `resonant-homog`: effective coefficients, dispersion sweeps and
//! homogenization checks for random dielectric rod media.

mod config;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("hypothesis violation: {0} (rerun with --force to proceed)")]
    Hypothesis(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, msg: impl std::fmt::Display) -> Self {
        Self::Config { path: path.into(), msg: msg.to_string() }
    }

    /// Process exit status.
    pub fn code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Config { .. } => 2,
            Self::Hypothesis(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl From<resonant_homog::Error> for CliError {
    fn from(e: resonant_homog::Error) -> Self {
        use resonant_homog::Error as E;
        match e {
            E::Io(e) => Self::Io(e.to_string()),
            E::InvalidLaw(_) | E::MarginViolation(_) | E::NegativeImaginaryPermittivity(_) | E::InvalidInput(_) => {
                Self::config("<input>", e)
            }
            other => Self::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Effective permeability over a wavenumber grid, one curve per law.
    MuSweep,
    /// Vanishing-dissipation limit of the permeability for several shifts `h`.
    MuLimit,
    /// Effective permittivity tensor and its bounds.
    EpsEff,
    /// Sample a rod realization inside the obstacle.
    Sample,
    /// Direct multiple scattering against the homogenized disk.
    Scatter,
    /// Convergence study of the direct solves towards the homogenized one.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::MuSweep => "mu-sweep",
            Self::MuLimit => "mu-limit",
            Self::EpsEff => "eps-eff",
            Self::Sample => "sample",
            Self::Scatter => "scatter",
            Self::Validate => "validate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "resonant-homog", version, about)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `numerics.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Proceed when the well-posedness hypotheses fail; sweeps then record
    /// NaN at resonant points.
    #[arg(long)]
    force: bool,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("RH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config("$RH_THREADS", format!("expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config("$RH_THREADS", e))
}

fn main_inner(args: Args) -> Result<(), CliError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", args.config.display())))?;
    let loaded = config::parse(&text)?;
    loaded.config.validate(args.command.name())?;
    let seed = args.seed.unwrap_or(loaded.config.numerics.seed);
    let out = args
        .out
        .or_else(|| loaded.config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = run::Context { command: args.command, config: loaded.config, digest: loaded.digest, seed, force: args.force, out };
    for path in run::dispatch(&ctx)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
