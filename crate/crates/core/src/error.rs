use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {requested} rows requested, budget is {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("model mismatch: sample was drawn from model {expected}, got {found}")]
    ModelMismatch { expected: String, found: String },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature did not converge: best estimate {estimate}, error estimate {gap:e}")]
    Quadrature { estimate: f64, gap: f64 },

    #[error("fit did not converge: {0}")]
    FitConvergence(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("insufficient data: {what} needs at least {needed}, found {found}")]
    InsufficientData {
        what: String,
        needed: usize,
        found: usize,
    },

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("no such file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
