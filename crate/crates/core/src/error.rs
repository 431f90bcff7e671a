use std::path::PathBuf;

use thiserror::Error;

use crate::barrier::FitCandidate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument was NaN or infinite.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Every path of the ensemble diverged (or the ensemble is empty).
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("theta is unidentifiable: {0}")]
    UnidentifiableTheta(String),

    #[error("barrier fit did not converge ({reason}); best grid candidate A={:.6}, theta={:.6}, C={:.6}", best.amplitude, best.theta, best.offset)]
    NonConvergent { reason: String, best: FitCandidate },

    #[error("digest mismatch for {file}: manifest says {expected}, file hashes to {actual}")]
    DigestMismatch {
        file: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: u64, reason: String },

    #[error("manifest not found at {0}")]
    MissingManifest(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse grouping used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Precondition,
    Analysis,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) | Error::Precondition(_) | Error::InvalidConfig(_) => ErrorCategory::Precondition,
            Error::EmptyInput(_) | Error::UnidentifiableTheta(_) | Error::NonConvergent { .. } => {
                ErrorCategory::Analysis
            }
            Error::DigestMismatch { .. }
            | Error::MalformedRow { .. }
            | Error::MissingManifest(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorCategory::Io,
        }
    }
}
