use crate::state::AgentId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A snapshot was pushed out of sequence.
    #[error("protocol error: expected frame {expected}, got {got}")]
    FrameMismatch { expected: u64, got: u64 },

    #[error("agent {0} has no goal")]
    MissingGoal(AgentId),

    #[error("agent {agent}: invalid parameters: {reason}")]
    InvalidParams { agent: AgentId, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input data is well-formed but insufficient or inconsistent.
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
