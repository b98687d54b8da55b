//! Analytic per-round traffic for one client, from the wire layout alone.

use serde::Serialize;

use bitfold_core::RingContext;
use bitfold_protocol::ModelSchema;

/// Magic, tag, payload length.
const FRAME_HEADER: u64 = 4 + 1 + 8;
/// Client id or round, round or participant count, ciphertext count.
const UPDATE_FIELDS: u64 = 8 + 8 + 4;
const BROADCAST_FIELDS: u64 = 8 + 8 + 4;
/// One `(lo, hi)` pair per layer.
const META_PER_LAYER: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrafficPrediction {
    /// Bytes one participating client uploads per round.
    pub upload: u64,
    /// Bytes every client downloads per round.
    pub download: u64,
    pub ciphertexts: u64,
    pub ciphertext_bytes: u64,
}

impl TrafficPrediction {
    /// Upload plus download, divided by the model size.
    pub fn bytes_per_weight(&self, weights: usize) -> f64 {
        (self.upload + self.download) as f64 / weights.max(1) as f64
    }
}

pub fn predict_traffic(schema: &ModelSchema, ctx: &RingContext) -> TrafficPrediction {
    let n = ctx.n() as u64;
    let limbs = ctx.limb_count() as u64;
    // Domain flag plus limb-major residues, twice.
    let ciphertext_bytes = 2 * (1 + limbs * n * 8);
    let ciphertexts: u64 = schema
        .layers()
        .iter()
        .map(|l| (l.weight_count as u64).div_ceil(l.layout.slots as u64 * l.layout.ring_degree as u64))
        .sum();
    let meta = META_PER_LAYER * schema.layers().len() as u64;
    let body = ciphertexts * ciphertext_bytes + meta;
    TrafficPrediction {
        upload: FRAME_HEADER + UPDATE_FIELDS + body,
        download: FRAME_HEADER + BROADCAST_FIELDS + body,
        ciphertexts,
        ciphertext_bytes,
    }
}
