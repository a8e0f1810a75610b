use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] softtopk_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{}: malformed record on line {line}: {reason}", path.display())]
    Parse { path: PathBuf, line: u64, reason: String },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("no benchmark records to write")]
    NoRecords,

    #[error("cannot draw charts: {0}")]
    Chart(String),

    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

impl BenchError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }
}
