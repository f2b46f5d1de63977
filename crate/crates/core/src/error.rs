use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller violated a precondition (bad parameter, wrong space, zero leading coefficient).
    #[error("usage error: {0}")]
    Usage(String),
    /// The available certificates are too weak to decide the question.
    #[error("undetermined: {0}")]
    Undetermined(String),
    /// A bounded search (power-of-two scaling, quadrature budget) gave up.
    #[error("search failed: {0}")]
    SearchFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
