use thiserror::Error;

use bitfold_core::{BfvError, PackingError};

use crate::transport::TransportError;
use crate::wire::WireError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Bfv(#[from] BfvError),
    #[error(transparent)]
    Packing(#[from] PackingError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("round {round}: {reason}")]
    RoundMismatch { round: u64, reason: String },
    #[error("round {round} aborted: received {received} of {expected} updates")]
    RoundAborted { round: u64, received: usize, expected: usize },
    #[error("inconsistent quantization metadata in layer {layer}")]
    QuantMetaMismatch { layer: usize },
    #[error("cannot sample {sample} of {total} clients")]
    InvalidSelection { total: usize, sample: usize },
    #[error("{participants} participants exceed the layout bound of {bound} clients")]
    TooManyParticipants { participants: u64, bound: u64 },
    #[error("client {0}: mask seed already used")]
    MaskReuse(u64),
    #[error("clients disagree on the global model after round {0}")]
    Divergence(u64),
    #[error("unexpected message from {0}")]
    UnexpectedMessage(String),
}
