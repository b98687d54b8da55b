//! Aggregating server. Holds no key material.

use std::sync::Arc;

use bitfold_core::bfv::add_ciphertexts;
use bitfold_core::RingContext;

use crate::error::ProtocolError;
use crate::model::ModelSchema;
use crate::wire::{AggregateBroadcast, EncryptedUpdate};

#[derive(Debug)]
pub struct Server {
    ctx: Arc<RingContext>,
    schema: Arc<ModelSchema>,
}

impl Server {
    pub fn new(ctx: Arc<RingContext>, schema: Arc<ModelSchema>) -> Self {
        Self { ctx, schema }
    }

    /// Position-wise homomorphic sum of exactly `expected` updates for `round`.
    pub fn server_aggregate(
        &self,
        round: u64,
        updates: &[EncryptedUpdate],
        expected: usize,
    ) -> Result<AggregateBroadcast, ProtocolError> {
        if updates.len() != expected || expected == 0 {
            return Err(ProtocolError::RoundAborted { round, received: updates.len(), expected });
        }
        if expected as u64 > self.schema.max_clients() {
            return Err(ProtocolError::TooManyParticipants {
                participants: expected as u64,
                bound: self.schema.max_clients(),
            });
        }
        let total = self.schema.total_polys();
        let first = &updates[0];
        for (i, u) in updates.iter().enumerate() {
            if u.round != round {
                return Err(ProtocolError::RoundMismatch {
                    round,
                    reason: format!("update from client {} is for round {}", u.client_id, u.round),
                });
            }
            if updates[..i].iter().any(|v| v.client_id == u.client_id) {
                return Err(ProtocolError::RoundMismatch {
                    round,
                    reason: format!("duplicate update from client {}", u.client_id),
                });
            }
            if u.cts.len() != total {
                return Err(ProtocolError::Schema(format!(
                    "client {} sent {} ciphertexts, expected {total}",
                    u.client_id,
                    u.cts.len()
                )));
            }
            if u.quant_meta.len() != first.quant_meta.len() {
                return Err(ProtocolError::QuantMetaMismatch { layer: u.quant_meta.len().min(first.quant_meta.len()) });
            }
            if let Some(layer) = (0..u.quant_meta.len()).find(|&l| !u.quant_meta[l].bits_eq(&first.quant_meta[l])) {
                return Err(ProtocolError::QuantMetaMismatch { layer });
            }
        }
        let cts = (0..total)
            .map(|pos| {
                let column: Vec<_> = updates.iter().map(|u| u.cts[pos].clone()).collect();
                add_ciphertexts(&self.ctx, &column)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AggregateBroadcast { round, participants: expected as u64, cts, quant_meta: first.quant_meta.clone() })
    }
}
