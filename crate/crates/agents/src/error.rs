use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] nncore::NnError),
    #[error(transparent)]
    Env(#[from] envapi::EnvError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("bad agent state: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, AgentError>;
