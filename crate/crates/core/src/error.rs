use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time grids differ: horizon {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid contact profile for pair {pair}: {reason}")]
    InvalidProfile { pair: String, reason: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("bin {bin} is outside the horizon of {horizon} bins")]
    BinOutOfRange { bin: usize, horizon: usize },

    #[error("network file, line {line} column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Condition(#[from] crate::conditions::ConditionError),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid simulation request: {0}")]
    InvalidSimulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
