use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the labeling, modeling and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("inconsistent pmf: {0}")]
    InconsistentPmf(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("no ground truth for instance `{0}`")]
    MissingGroundTruth(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: protocol violation: {message}")]
    StoreViolation { line: usize, message: String },

    #[error("store {0} is locked by another writer")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
