use thiserror::Error;

/// Errors raised by the simulation engine and its analysis pipeline.
#[derive(Debug, Error)]
pub enum SwarmError {
    /// A state or input contained NaN or an infinity.
    #[error("model integrity violated: {0}")]
    ModelIntegrity(String),

    #[error("unknown agent id {0}")]
    UnknownAgent(u32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SwarmError> = std::result::Result<T, E>;
