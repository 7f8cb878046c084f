//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown node '{0}' in topology")]
    UnknownNode(String),

    #[error("protocol contract violation: {0}")]
    Contract(String),

    #[error("undisclosed decoy positions: round {0} carries a decoy not in the disclosure")]
    UndisclosedDecoy(u64),

    #[error("distillation refused: session verdict is abort")]
    DistillAfterAbort,

    #[error("malformed classical message: {0}")]
    Wire(String),

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
