use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("data error: {0}")]
    Data(String),

    /// Group sampling could not place a group within its rejection budget.
    #[error("rejection budget of {budget} attempts exhausted while placing group {group}; retry with a new seed")]
    RejectionBudget { group: usize, budget: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}; parameter norms: {norms}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        norms: String,
    },

    #[error("container format error: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
