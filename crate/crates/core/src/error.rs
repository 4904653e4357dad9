use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mask index {index} out of range for {n} agents")]
    InvalidMask { index: usize, n: usize },

    #[error("valuation arity mismatch: {detail} (profile length {got})")]
    ArityMismatch { detail: String, got: usize },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error(
        "allocation not monotone in agent {agent}'s signal: allocated at {lower}, \
         not allocated at {upper}"
    )]
    MonotonicityViolation {
        agent: usize,
        lower: f64,
        upper: f64,
    },

    #[error("tie detected: {0}")]
    TieDetected(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
