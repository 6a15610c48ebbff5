use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("codeword {index} is annihilated by the rotation")]
    DegenerateCodeword { index: usize },
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("stacked feedback matrix is rank deficient")]
    RankDeficient,
    #[error("trial {trial} aborted after {attempts} rank-deficient redraws")]
    AbortTrial { trial: usize, attempts: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
