//! Config-driven experiment runner: TOML configs in, CSV reports and SVG plots out.

pub mod config;
pub mod plot;
pub mod runner;

use std::path::Path;

use thiserror::Error;

pub use config::{ExperimentConfig, Kind, Validated};
pub use runner::{Assertion, RunOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("runtime error: {0}")]
    Runtime(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Schema(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) | CliError::Io(_) => 4,
        }
    }
}

impl From<velobound_core::Error> for CliError {
    fn from(e: velobound_core::Error) -> Self {
        use velobound_core::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::GridMismatch
            | E::InvalidRho(_)
            | E::InvalidPotential(_)
            | E::UnmollifiedSingularity
            | E::SizeCap { .. }
            | E::InvalidCutoff(_)
            | E::InvalidArgument(_)
            | E::Precondition(_)
            | E::NegativeSymbolArgument(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Worker count from `VELOBOUND_THREADS`, or `None` for the rayon default.
pub fn thread_limit() -> Option<usize> {
    std::env::var("VELOBOUND_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Parses and validates a config file; relative output directories resolve against its folder.
pub fn load_validated(path: &Path) -> Result<Validated, CliError> {
    let cfg = config::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    config::validate(cfg, base)
}

/// Loads, validates and runs a config inside a pool capped by `VELOBOUND_THREADS`.
pub fn run_path(path: &Path) -> Result<RunOutcome, CliError> {
    let validated = load_validated(path)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| runner::run(&validated))
}
