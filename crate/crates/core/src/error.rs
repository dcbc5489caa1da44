use thiserror::Error;

/// Errors raised by the solvers and model constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input: wrong shapes, out-of-range indices, unknown ids.
    #[error("usage error: {0}")]
    Usage(String),

    /// A model invariant was violated when constructing a value.
    #[error("invalid model: {0}")]
    Invalid(String),

    /// An iterative numeric routine gave up.
    #[error("numeric failure in {routine}: {detail}")]
    NumericFailure { routine: &'static str, detail: String },

    /// `I - Z` (or another system matrix) could not be inverted.
    #[error("singular system: {0}")]
    Singular(String),

    /// A fixed-point solve ran out of iterations.
    #[error("no convergence after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
    },

    /// Exhaustive enumeration was asked for on too many agents.
    #[error("{n} agents exceed the enumeration limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    /// A sufficient condition required by the operation does not hold.
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
