//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors raised by dataset handling, model training, and the solvers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// CSV or schema problem while reading a dataset.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Header does not match the expected schema.
    #[error("schema mismatch in {path}: {message}")]
    SchemaMismatch { path: String, message: String },

    /// Shapes or lengths of inputs disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An operation received input it cannot work with.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Iterative training or a solver produced a non-finite value.
    #[error("numeric divergence: {0}")]
    Divergence(String),

    /// Filesystem error wrapped with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
