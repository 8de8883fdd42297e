use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperparameter { name: String, reason: String },

    #[error("invalid configuration space: {0}")]
    InvalidSpace(String),

    #[error("illegal configuration: {0}")]
    IllegalConfiguration(String),

    #[error("configuration space has no tunable hyperparameters")]
    NoTunableDimensions,

    #[error("input out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid training data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration space exhausted: every candidate is already in the history")]
    SpaceExhausted,

    #[error("too many players for exact Shapley enumeration: {players} > {limit}")]
    TooManyPlayers { players: usize, limit: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("unknown task `{0}` (valid: zdt1, zdt2, zdt3, zdt4, zdt6, mixed)")]
    UnknownTask(String),

    #[error("unknown optimizer `{0}` (valid: hpi-parego, parego, random, nsga2)")]
    UnknownOptimizer(String),

    #[error("malformed history: {0}")]
    MalformedHistory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
