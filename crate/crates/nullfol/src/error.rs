use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NullfolError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric failure: {message} (residual {residual:e})")]
    NumericFailure { message: String, residual: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
}

pub type Result<T> = std::result::Result<T, NullfolError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(NullfolError::InvalidArgument(msg.into()))
}

pub(crate) fn numeric<T>(msg: impl Into<String>, residual: f64) -> Result<T> {
    Err(NullfolError::NumericFailure {
        message: msg.into(),
        residual,
    })
}
