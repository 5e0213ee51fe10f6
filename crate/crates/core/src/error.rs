use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid moments: {0}")]
    InvalidMoments(String),
    #[error("value {0} outside the distribution support")]
    DomainError(f64),
    #[error("probability {0} must lie strictly inside (0, 1)")]
    InvalidProbability(f64),
    #[error("matrix is not positive definite{}", context(.0))]
    NotPositiveDefinite(String),
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("linear limit state needs at least one coefficient")]
    EmptyCoefficients,
    #[error("parse error at position {pos}: {message}")]
    ParseError { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("evaluation error: {0}")]
    EvaluationError(String),
    #[error("non-finite value {0}")]
    NonFiniteValue(f64),
    #[error("limit state is not finite at sample {index}")]
    NonFiniteLimitState { index: usize },

    #[error("limit-state variance is zero")]
    DegenerateVariance,
    #[error("finite-difference gradient is not finite")]
    GradientFailure,
    #[error("vector is zero")]
    ZeroVector,

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error("all importance weights at failure points are zero")]
    DegenerateWeights,
    #[error("probability {0} has no finite reliability index")]
    OutOfRange(f64),

    #[error("central-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("variable index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("sample batch is empty")]
    EmptyBatch,
    #[error("no failures in the sample batch; sensitivities are undefined")]
    AllSafe,

    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("run {run} failed: {source}")]
    Run { run: usize, source: Box<Error> },
}

fn context(s: &str) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!(" ({s})")
    }
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// True for errors caused by the numerical procedure rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. }
            | Error::AllSafe
            | Error::GradientFailure
            | Error::DegenerateWeights
            | Error::DegenerateVariance
            | Error::NonFiniteLimitState { .. }
            | Error::NonFiniteValue(_)
            | Error::EvaluationError(_)
            | Error::OutOfRange(_) => true,
            Error::Run { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
