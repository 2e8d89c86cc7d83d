use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material parameters: {}", .0.join("; "))]
    InvalidParameters(Vec<String>),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid cutoff specification: {0}")]
    InvalidCutoff(String),

    #[error("difference step rejected: {0}")]
    InvalidStep(String),

    #[error("numerical instability at t = {time}: {diagnosis}")]
    Unstable { time: f64, diagnosis: String },

    #[error("eigen solver failure: {0}")]
    Eigen(String),

    #[error("coercivity failure: estimated constant {0} is not positive")]
    CoercivityFailure(f64),

    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    #[error("configuration rejected")]
    Config(Vec<ConfigViolation>),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error at {path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// One rejected configuration entry, located by a JSON pointer.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConfigViolation {
    pub pointer: String,
    pub message: String,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameters(_) => "invalid_parameters",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidCutoff(_) => "invalid_cutoff",
            Error::InvalidStep(_) => "invalid_step",
            Error::Unstable { .. } => "unstable",
            Error::Eigen(_) => "eigen",
            Error::CoercivityFailure(_) => "coercivity_failure",
            Error::UnknownCase(_) => "unknown_case",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }

    /// True for errors caused by user input rather than the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameters(_)
                | Error::InvalidGrid(_)
                | Error::ShapeMismatch(_)
                | Error::InvalidArgument(_)
                | Error::InvalidCutoff(_)
                | Error::InvalidStep(_)
                | Error::UnknownCase(_)
                | Error::Config(_)
        )
    }
}
