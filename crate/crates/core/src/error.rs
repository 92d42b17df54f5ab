use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown team: {0}")]
    UnknownTeam(String),

    #[error("team {0} has no matches in the training window")]
    EmptyHistory(String),

    #[error("insufficient data: {available} observations, at least {required} required")]
    InsufficientData { available: usize, required: usize },

    #[error("fit did not converge after {restarts} restarts (best log-likelihood {best_loglik:.6})")]
    Fit {
        restarts: usize,
        best_point: Vec<f64>,
        best_loglik: f64,
        gradient_norm: f64,
    },

    #[error("forecast and realized results disagree: {0}")]
    Mismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
