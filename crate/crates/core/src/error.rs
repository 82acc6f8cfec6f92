//! Error type shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while loading prediction logs or evaluating them.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure: missing file, unreadable stream, failed write.
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed input line; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// Input that parsed but violates a contract (ranges, shapes, arguments).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Datasets, specs, or policies disagree on the number of classes.
    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassMismatch { expected: usize, found: usize },

    /// The requested operation is undefined for the given cost spec.
    #[error("unsupported cost spec: {0}")]
    UnsupportedSpec(String),

    /// Paired datasets do not describe the same items.
    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),

    /// An operation that needs at least one record got none.
    #[error("empty dataset: {0}")]
    Empty(String),
}

impl Error {
    /// Convenience constructor for validation failures.
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
