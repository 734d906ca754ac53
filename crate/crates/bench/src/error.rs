use thiserror::Error;

/// Failures split by exit code: bad input is a validation error, anything
/// that goes wrong while running is a runtime error.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

pub type BenchResult<T> = Result<T, BenchError>;

impl BenchError {
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Validation(_) => 1,
            BenchError::Runtime(_) => 2,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> BenchError {
    BenchError::Validation(msg.into())
}

impl From<svdro_core::Error> for BenchError {
    fn from(e: svdro_core::Error) -> Self {
        match e {
            svdro_core::Error::Config(m) => BenchError::Validation(m),
            other => BenchError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Runtime(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Runtime(format!("csv: {e}"))
    }
}
