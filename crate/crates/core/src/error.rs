use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order {0}: must be at least 2")]
    InvalidOrder(u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
