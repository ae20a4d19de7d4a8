use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by dataset loading, model fitting and experiment runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{context}: {message}")]
    InvalidInput {
        context: &'static str,
        message: String,
    },

    #[error("{file}:{line}: {message}")]
    Load {
        file: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("too few targets for {folds}-fold target split (have {targets})")]
    TooFewTargets { targets: usize, folds: usize },

    #[error("invalid split view: {0}")]
    InvalidSplit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("evaluation of {method} with {learner} on {dataset} failed: {message}")]
    Evaluation {
        dataset: String,
        method: String,
        learner: String,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(context: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            context,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
