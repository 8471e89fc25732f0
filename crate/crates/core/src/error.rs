use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible power constraint: bound {bound} must be positive")]
    InfeasibleBound { bound: f64 },

    #[error("mode {mode} requires the subband mode to be evaluated first")]
    Ordering { mode: String },

    #[error("degenerate KKT system: {0}")]
    Degenerate(String),

    #[error("{failed} of {total} drops failed (limit is 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error on {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
