use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller supplied arguments that violate a precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// A sample point or argument lies outside the problem domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A function value or intermediate result was not finite.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The feasible set is empty; `residual` certifies how far the data are
    /// from being attainable.
    #[error("infeasible: {what} (residual {residual:e})")]
    Infeasible { what: String, residual: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Instance too large for an exact enumeration method.
    #[error("scale error: {0}")]
    Scale(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for errors caused by the caller's inputs rather than by the
    /// numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Scale(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
