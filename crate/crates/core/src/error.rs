use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("H must lie in (1/2,1), got {0}")]
    HurstOutOfRange(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("value types differ: {0}")]
    TypeMismatch(String),

    #[error("interval ({a}, {b}] is not aligned to the time grid (dt = {dt})")]
    Misaligned { a: f64, b: f64, dt: f64 },

    #[error("noise count mismatch: integrand uses {needed} noises, ensemble provides {available}")]
    NoiseCount { needed: usize, available: usize },

    #[error("covariance factorization failed at row {row}: {hint}")]
    Factorization { row: usize, hint: String },

    #[error("{0}")]
    Domain(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
