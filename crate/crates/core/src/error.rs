use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("logistic regression failed: normal equations are singular (possible separation)")]
    Separation,

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("degenerate score Jacobian (|J0| = {0:e})")]
    DegenerateJacobian(f64),

    #[error("propensity {value} at row {row} is not strictly inside (0, 1); clip before use")]
    UnclippedPropensity { row: usize, value: f64 },

    #[error("ingestion error at row {row}: {msg}")]
    Ingest { row: usize, msg: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
