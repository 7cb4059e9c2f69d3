use thiserror::Error;

/// Errors raised by the discretisation, solvers and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("field/domain mismatch: {0}")]
    Mismatch(String),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operator `{0}` has no energy form; only the canonical p-Laplace flux can be minimised")]
    NonCanonicalOperator(String),
    #[error("non-finite energy at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },
    #[error("whitney decomposition: {0}")]
    Whitney(String),
    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
