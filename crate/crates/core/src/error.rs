//! Shared error type for the whole pipeline.

use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong across models, data ingestion, fitting,
/// training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value violates a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A data file is structurally unreadable. `line` is 1-based; the header
    /// row is line 1.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// Filesystem failure, tagged with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Invalid run, problem, or hyperparameter configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical procedure failed irrecoverably.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
