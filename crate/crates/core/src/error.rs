use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid physical parameters or arguments.
    #[error("{0}")]
    Domain(String),

    /// The tridiagonal QL iteration did not converge for eigenvalue `index`.
    #[error("eigensolver failed to converge for eigenvalue {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A state the algorithms should never reach (e.g. an identically zero energy curve).
    #[error("logic error: {0}")]
    Logic(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Whether this error stems from bad input rather than a numeric failure.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_))
    }
}
