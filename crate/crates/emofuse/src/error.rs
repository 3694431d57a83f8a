//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// I/O failures are kept separate from data problems so callers (notably the
/// CLI) can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input data, with the 1-based line it came from.
    #[error("parse: {source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// Input that parsed but violates an invariant (unknown label, bad shape
    /// declaration, label-set mismatch, ...).
    #[error("validation: {0}")]
    Validation(String),

    /// Well-formed file in a format this crate does not handle
    /// (e.g. multi-channel WAV).
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// Training aborted (non-finite loss or gradient).
    #[error("training aborted: {0}")]
    Training(String),
}

impl Error {
    pub fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
