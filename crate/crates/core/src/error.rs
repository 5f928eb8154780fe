//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A row had zero norm where unit-normalization is required.
    #[error("cannot l2-normalize row {row}: zero norm")]
    ZeroNormRow { row: usize },

    /// Weight divergence is undefined for a zero local delta.
    #[error("weight divergence undefined: local delta has zero norm")]
    ZeroLocalDelta,

    /// Training produced a non-finite loss.
    #[error(
        "training diverged: non-finite loss {loss} at epoch {epoch}, batch {batch} \
         (learning rate {learning_rate} is likely too high)"
    )]
    TrainingDiverged {
        loss: f64,
        epoch: usize,
        batch: usize,
        learning_rate: f64,
    },

    /// No shared class had enough samples on both sides to compute the metric.
    #[error("no qualifying shared classes (min {min_samples} per side); per-class counts: {counts}")]
    NoQualifyingClasses { min_samples: usize, counts: String },

    /// Activations or intermediate values were non-finite.
    #[error("non-finite values encountered in {0}")]
    NonFinite(String),

    /// The zCDP budget failed the reconstruction-infeasibility gate.
    #[error(
        "privacy budget rejected: rho {rho} >= threshold {threshold} for d={dim}, n={samples} \
         (pass --allow-weak-privacy to override)"
    )]
    BudgetGate {
        rho: f64,
        threshold: f64,
        dim: usize,
        samples: usize,
    },

    /// A mask identifier was presented twice to the masking protocol.
    #[error("secure protocol aborted: mask identifier {0} reused")]
    MaskReuse(u128),

    /// A serialized file had an unknown magic header or version.
    #[error("unrecognized file format: {0}")]
    BadFormat(String),

    /// Experiment configuration failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Some per-seed runs of an experiment failed.
    #[error("partial failure: {failed} of {total} runs failed; first error: {first}")]
    PartialFailure {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config error, 3 partial failure,
    /// 4 privacy-gate refusal, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::PartialFailure { .. } => 3,
            Error::BudgetGate { .. } => 4,
            _ => 1,
        }
    }
}
