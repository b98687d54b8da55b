//! Federated averaging over packed, additively encrypted updates.
//!
//! Clients share one secret key and encrypt packed, quantized weights; the
//! server only adds ciphertexts and never holds key material.

pub mod client;
pub mod control;
pub mod error;
pub mod ledger;
pub mod model;
pub mod pipeline;
pub mod round;
pub mod select;
pub mod server;
pub mod transport;
pub mod wire;

pub use client::{apply_broadcast, shared_secret_key, Client};
pub use control::PlaintextControl;
pub use error::ProtocolError;
pub use ledger::{RoundTraffic, TrafficLedger};
pub use model::{LayerSpec, Model, ModelSchema};
pub use pipeline::{quant_params, IdentityTrainer, QuantPadding, StageTimings, TrainerHook, STAGE_NAMES};
pub use round::{Federation, FederationConfig, RoundOutcome};
pub use select::select_clients;
pub use server::Server;
pub use transport::{Endpoint, MemoryTransport, SocketTransport, Transport, TransportError};
pub use wire::{AggregateBroadcast, EncryptedUpdate, Message, QuantMeta};
