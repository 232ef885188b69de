//! Command implementations behind the `flame` binary.

pub mod bench;
pub mod config;
pub mod report;
pub mod run;
pub mod selftest;

use std::time::Duration;

use flame_core::comm::{GroupFailure, RankFailure};
use flame_core::Error;
use thiserror::Error as ThisError;

pub use config::{Backend, RunConfig};

/// Environment variable overriding the collective timeout, in seconds.
pub const TIMEOUT_ENV: &str = "FLAME_TIMEOUT_SECS";

#[derive(Debug, ThisError)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    BlowUp(String),
    #[error("communication failure: {0}")]
    Comm(String),
    #[error("self-test failed: {0}")]
    Selftest(String),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::BlowUp(_) => 3,
            AppError::Comm(_) => 4,
            AppError::Selftest(_) => 5,
            AppError::Other(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::BlowUp(m) | AppError::Comm(m) | AppError::Selftest(m) | AppError::Other(m) => m,
        }
    }
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        match e {
            Error::Comm(c) => AppError::Comm(c.to_string()),
            e @ Error::BlowUp { .. } => AppError::BlowUp(e.to_string()),
            e @ (Error::InvalidParameter(_) | Error::NonSmoothLength(_)) => AppError::Config(e.to_string()),
            e => AppError::Other(e.to_string()),
        }
    }
}

impl From<GroupFailure<Error>> for AppError {
    fn from(g: GroupFailure<Error>) -> Self {
        let first = g.first;
        match g.into_root_cause() {
            RankFailure::Error(e) => match AppError::from(e) {
                AppError::Comm(m) => AppError::Comm(format!("rank {first}: {m}")),
                other => other,
            },
            RankFailure::Panic(m) => AppError::Other(format!("rank {first} panicked: {m}")),
        }
    }
}

/// Collective timeout from the environment, if set.
pub fn timeout_override() -> Result<Option<Duration>, AppError> {
    match std::env::var(TIMEOUT_ENV) {
        Ok(v) => {
            let secs: f64 = v
                .trim()
                .parse()
                .map_err(|_| AppError::Config(format!("{TIMEOUT_ENV}={v:?} is not a number of seconds")))?;
            if !(secs > 0.0 && secs.is_finite()) {
                return Err(AppError::Config(format!("{TIMEOUT_ENV} must be positive")));
            }
            Ok(Some(Duration::from_secs_f64(secs)))
        }
        Err(_) => Ok(None),
    }
}
