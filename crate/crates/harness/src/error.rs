use thiserror::Error;

/// Failures split by the exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(format!("io error: {e}"))
    }
}

impl From<simworld::SimError> for HarnessError {
    fn from(e: simworld::SimError) -> Self {
        match e {
            simworld::SimError::MissingAnchor | simworld::SimError::Map(_) => HarnessError::Config(e.to_string()),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<envapi::EnvError> for HarnessError {
    fn from(e: envapi::EnvError) -> Self {
        match e {
            envapi::EnvError::Config(m) => HarnessError::Config(m),
            envapi::EnvError::Sim(s) => s.into(),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<agents::AgentError> for HarnessError {
    fn from(e: agents::AgentError) -> Self {
        match e {
            agents::AgentError::Config(m) => HarnessError::Config(m),
            agents::AgentError::Env(env) => env.into(),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<depthgen::DepthError> for HarnessError {
    fn from(e: depthgen::DepthError) -> Self {
        match e {
            depthgen::DepthError::Config(m) => HarnessError::Config(m),
            depthgen::DepthError::Sim(s) => s.into(),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<nncore::NnError> for HarnessError {
    fn from(e: nncore::NnError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
