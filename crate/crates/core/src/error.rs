use std::path::PathBuf;

use thiserror::Error;

use crate::scalar::ScalarError;

/// Every failure the pipeline can report. [`Error::exit_code`] maps them onto
/// the command-line convention.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model error: {0}")]
    Model(String),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error(
        "finite type not detected within bounds: {types_found} types found, level {level_reached} reached ({reason})"
    )]
    NotDetected {
        types_found: usize,
        level_reached: usize,
        reason: String,
    },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn model(msg: impl Into<String>) -> Error {
        Error::Model(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(_) | Error::Scalar(_) | Error::Io { .. } => 1,
            Error::Resource(_) | Error::NotDetected { .. } => 2,
            Error::Numerical(_) | Error::Verification(_) | Error::Internal(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
