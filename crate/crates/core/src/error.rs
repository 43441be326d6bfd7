use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameters that cannot form a valid device or tracker configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of an operation (row out of range, edge victim, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller broke a sequencing contract (window overflow, non-monotonic act_seq).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A malformed mitigation command encoding.
    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed input that violates a semantic constraint (row out of range, length cap).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
