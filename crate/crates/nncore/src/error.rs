use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid layer configuration: {0}")]
    Config(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("activations do not belong to the current parameters (stale forward pass)")]
    StaleActivations,
    #[error("malformed parameter blob: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, NnError>;
