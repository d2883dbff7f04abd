use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Validation(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("boundary condition {0} requires a complex field")]
    NeedsComplex(String),

    #[error("zero field")]
    ZeroField,

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("quadrature range insufficient: {0}")]
    Quadrature(String),

    #[error("field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
