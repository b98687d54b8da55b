use std::path::PathBuf;

use thiserror::Error;

use bitfold_core::{PackingError, RingError};
use bitfold_protocol::{ProtocolError, TransportError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("infeasible layout: {0}")]
    Packing(#[from] PackingError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("round {round}: {source}")]
    Round { round: u64, source: ProtocolError },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}
