use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sampling interval must be positive, got {0}")]
    NonPositiveInterval(f64),

    #[error("process noise intensity must be non-negative, got {0}")]
    NegativeNoiseIntensity(f64),

    #[error("covariance matrix is not symmetric positive semidefinite")]
    NotPositiveSemidefinite,

    #[error("particle cloud is empty")]
    EmptyCloud,

    #[error("valuation {value} lies outside [{lo}, {hi}]")]
    ValuationOutOfBounds { value: f64, lo: f64, hi: f64 },

    #[error("invalid valuation bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("invalid knapsack instance: {0}")]
    InvalidInstance(String),

    #[error("instance has {0} feasible combinations, too many to enumerate")]
    InstanceTooLarge(u128),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
