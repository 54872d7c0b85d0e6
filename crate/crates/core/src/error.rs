//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A truncation region retains no representable probability mass, so an
    /// inverse-CDF draw would silently pin to an endpoint. Callers decide
    /// whether to widen the region or record a prior-data conflict.
    #[error("truncation mass underflow: {context}")]
    TruncationMassUnderflow { context: String },

    /// A degenerate (sigma = 0) prior sits below the identified lower bound
    /// at the listed design points; clamping would hide the conflict.
    #[error("degenerate prior contradicts bound at {} design point(s): {points:?}", points.len())]
    DegeneratePriorConflict { points: Vec<usize> },

    /// Stage-2 input does not match the provenance recorded with the phi
    /// draws, so replaying the sampler would not be auditable.
    #[error("provenance hash mismatch: {0}")]
    ProvenanceMismatch(String),

    /// Compliance monotonicity Pr(T=1|Z=1,x) >= Pr(T=1|Z=0,x) failed.
    #[error("monotonicity violated: {0}")]
    MonotonicityViolated(String),

    /// A principal stratum has probability zero, so parameters conditional
    /// on membership are vacuous.
    #[error("stratum absent, parameter vacuous: {0}")]
    StratumAbsent(String),

    /// A joint (theta, phi) draw left the identified-set support; the draw
    /// must be rejected and the event counted.
    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
