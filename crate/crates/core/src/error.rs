use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("no convergence after {iterations} iterations (achieved {achieved:e})")]
    Convergence { iterations: usize, achieved: f64 },

    /// The weight system of the characterization theorem has no nonnegative
    /// solution, so the candidate polynomial is not a best approximation.
    #[error("not optimal: no positive weights satisfy the orthogonality condition (residual {residual:e})")]
    NotOptimal { residual: f64 },

    #[error("conjugate symmetry violated: {0}")]
    Symmetry(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
