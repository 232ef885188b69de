use std::path::PathBuf;

use thiserror::Error;

use crate::comm::CommError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error("transform length {0} is not 5-smooth")]
    NonSmoothLength(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("field must be {expected} for this operation")]
    Orientation { expected: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical blow-up at step {step} (t = {t}): {detail}")]
    BlowUp { step: u64, t: f64, detail: String },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("callback failed: {0}")]
    Callback(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
