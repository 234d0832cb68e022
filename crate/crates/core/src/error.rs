use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular matrix at pivot {pivot} ({context})")]
    Singular { pivot: usize, context: String },

    #[error("ill-conditioned system (condition estimate {estimate:.3e}) in {context}")]
    IllConditioned { estimate: f64, context: String },

    #[error("{what} did not converge after {iterations} iterations (partial value {partial})")]
    NonConvergence { what: &'static str, iterations: usize, partial: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("coincident source parameters: {0}; use the confluent weight construction instead")]
    Confluent(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for errors caused by the caller's parameters rather than by the
    /// numerics themselves.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Capacity(_) | Error::Confluent(_) | Error::Unsupported(_))
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Replace the context of a singularity error.
    pub(crate) fn in_context(self, context: impl Into<String>) -> Self {
        match self {
            Error::Singular { pivot, .. } => Error::Singular { pivot, context: context.into() },
            Error::IllConditioned { estimate, .. } => {
                Error::IllConditioned { estimate, context: context.into() }
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
