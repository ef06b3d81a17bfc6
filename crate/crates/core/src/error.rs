use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode specification: {0}")]
    InvalidSpec(String),

    #[error("basis is empty: {0}")]
    EmptyBasis(String),

    #[error("operand lives on a different basis ({0})")]
    BasisMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator violates {law} conservation: {detail}")]
    Conservation { law: &'static str, detail: String },

    #[error("mode not present in basis: {0}")]
    MissingMode(String),

    #[error("state is not normalized: |alpha|^2 + |beta|^2 = {0}")]
    NotNormalized(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trace drifted to {trace} at t = {time} (tolerance {tol}); tighten the step tolerances")]
    TraceDrift { time: f64, trace: f64, tol: f64 },

    #[error("non-finite value in solution at t = {time} (step size {step})")]
    NonFinite { time: f64, step: f64 },

    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),

    #[error("basis dimension {dim} exceeds the budget of {limit}; set allow_large to override")]
    DimensionBudget { dim: usize, limit: usize },

    #[error("found {found} usable extrema in '{observable}', need at least {needed}; extend t_final")]
    TooFewPeaks {
        observable: String,
        found: usize,
        needed: usize,
    },

    #[error("unknown observable '{0}'")]
    UnknownObservable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
