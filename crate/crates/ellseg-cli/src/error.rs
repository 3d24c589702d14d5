//! Error classes of the CLI, each with its own process exit code so scripts
//! can tell failure modes apart.

use std::path::PathBuf;

use ellseg_core::solver::SolverError;
use thiserror::Error;

/// Exit codes, grouped by failure class. Code 2 is left to clap for usage
/// errors.
pub mod exit {
    pub const IO: i32 = 3;
    pub const CONFIG: i32 = 4;
    pub const NUMERIC: i32 = 5;
    pub const DIMENSION: i32 = 6;
    pub const EMPTY_MASK: i32 = 7;
    pub const BAD_ELLIPSE: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode image {path}: {source}")]
    BadImage {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("solver aborted: {0}")]
    Numeric(SolverError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("mask is empty or degenerate: {0}")]
    EmptyMask(String),
    #[error("invalid ellipse parameters: {0}")]
    BadEllipse(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Unreadable { .. } | CliError::Unwritable { .. } | CliError::BadImage { .. } => {
                exit::IO
            }
            CliError::Config(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::Dimension(_) => exit::DIMENSION,
            CliError::EmptyMask(_) => exit::EMPTY_MASK,
            CliError::BadEllipse(_) => exit::BAD_ELLIPSE,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            // Hyperparameter problems are config problems; only the numeric
            // sentinel is a runtime abort.
            SolverError::NonFinite { .. } => CliError::Numeric(e),
            other => CliError::Config(other.to_string()),
        }
    }
}
