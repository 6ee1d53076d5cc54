use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Carries the 1-norm condition estimate that tripped the threshold.
    #[error("matrix is singular or ill-conditioned (condition estimate {0:.3e})")]
    Singular(f64),

    #[error("{what} did not converge within {iters} iterations")]
    NoConvergence { what: &'static str, iters: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("observation {index} = {value} is outside the support: {reason}")]
    Support {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("{failed} of {total} replicates failed to fit")]
    TooManyFailures { failed: u64, total: u64 },
}

impl Error {
    /// True for failures of an iterative fit, as opposed to bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Degenerate(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
