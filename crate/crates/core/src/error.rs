use thiserror::Error;

/// Errors raised by the atvkit library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The prefix is unknown to the law or carries zero probability.
    #[error("prefix {0} is not supported by the law")]
    PrefixNotSupported(String),

    /// A time index or horizon is outside `1..=T`.
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    /// Two objects live on incompatible path spaces.
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    /// A measure that should be a probability measure is not.
    #[error("measure is not a probability (total mass {0})")]
    NotProbability(f64),

    /// Malformed law document.
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    /// Source and target masses of a transport problem disagree.
    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A joint measure does not reproduce the requested marginals.
    #[error("not a coupling: {0}")]
    NotACoupling(String),

    #[error("index {index} out of range 1..={max}")]
    InvalidIndex { index: usize, max: usize },

    /// The exact oracle refuses instances above its size cap.
    #[error("instance too large for the exact oracle: {size} variables (cap {cap})")]
    TooLarge { size: usize, cap: usize },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("weight function error: {0}")]
    Weight(String),

    /// Internal solver failure (iteration cap, failed certificate, infeasible LP).
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
