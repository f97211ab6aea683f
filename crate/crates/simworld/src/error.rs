use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("map parse error at line {line}, column {col}: {message}")]
pub struct MapError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl MapError {
    pub(crate) fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        MapError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("map has no evaluation spawn anchor ('S' cell)")]
    MissingAnchor,
    #[error("spawn failed: {0}")]
    Spawn(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid image: {0}")]
    Image(String),
}
