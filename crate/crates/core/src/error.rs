use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    Format(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("duplicate entry: {0}")]
    Duplicate(String),

    #[error("degenerate samples: {0}")]
    Degenerate(String),

    #[error("one-sided samples: {0}")]
    Support(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error("unsupported version {found:?} (expected {expected:?})")]
    Version { expected: String, found: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("solver did not converge: KKT violation {violation:e} after {iterations} iterations")]
    Convergence { violation: f64, iterations: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
