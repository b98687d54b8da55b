//! Client side: local training, quantize, pack, encrypt; then decrypt, unpack, average, dequantize.

use std::collections::HashSet;
use std::sync::Arc;

use bitfold_core::bfv::{self, CiphertextTag, EncryptionMask, SecretKey};
use bitfold_core::packing::{
    average_unpacked, dequantize_layer, pack_layer, quantize_layer, unpack_layer, PackedLayer,
};
use bitfold_core::{PlaintextPoly, RingContext, Seed};

use crate::error::ProtocolError;
use crate::model::{Model, ModelSchema};
use crate::pipeline::{quant_meta, quant_params, timed, QuantPadding, StageTimings, TrainerHook};
use crate::wire::{AggregateBroadcast, EncryptedUpdate};

const STREAM_KEY: u64 = 0x6b6579;

/// The shared secret key all clients derive from the pre-shared seed.
pub fn shared_secret_key(ctx: &RingContext, shared_seed: &Seed) -> SecretKey {
    bfv::keygen(ctx, &shared_seed.derive(STREAM_KEY, 0))
}

pub struct Client {
    id: u64,
    ctx: Arc<RingContext>,
    schema: Arc<ModelSchema>,
    sk: SecretKey,
    /// Private randomness for encryption masks.
    mask_seed: Seed,
    used_masks: HashSet<Seed>,
    model: Model,
    padding: QuantPadding,
}

impl std::fmt::Debug for Client {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Client").field("id", &self.id).field("masks_used", &self.used_masks.len()).finish()
    }
}

impl Client {
    pub fn new(
        id: u64,
        ctx: Arc<RingContext>,
        schema: Arc<ModelSchema>,
        sk: SecretKey,
        mask_seed: Seed,
        initial: Model,
        padding: QuantPadding,
    ) -> Result<Self, ProtocolError> {
        schema.check_model(&initial)?;
        Ok(Self { id, ctx, schema, sk, mask_seed, used_masks: HashSet::new(), model: initial, padding })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Current global model `W^(t−1)` as this client sees it.
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn masks_used(&self) -> impl Iterator<Item = &Seed> {
        self.used_masks.iter()
    }

    /// Preparation stage: one fresh mask per polynomial of the update.
    pub fn prepare_masks(&mut self, round: u64) -> Result<Vec<EncryptionMask>, ProtocolError> {
        let total = self.schema.total_polys() as u64;
        let mut masks = Vec::with_capacity(total as usize);
        for index in 0..total {
            let seed = self.mask_seed.derive(round, index);
            if !self.used_masks.insert(seed) {
                return Err(ProtocolError::MaskReuse(self.id));
            }
            masks.push(bfv::prepare_mask(&self.ctx, &self.sk, &seed));
        }
        Ok(masks)
    }

    /// Local computation for `round`: train, quantize against `W^(t−1)`, pack, encrypt.
    pub fn client_round(
        &mut self,
        round: u64,
        trainer: &dyn TrainerHook,
    ) -> Result<(EncryptedUpdate, StageTimings), ProtocolError> {
        let mut timings = StageTimings::default();
        let local = timed(&mut timings.train, || trainer.train(self.id, round, &self.model));
        self.schema.check_model(&local)?;

        let params = quant_params(&self.schema, &self.model, self.padding)?;
        let ints: Vec<Vec<u64>> = timed(&mut timings.quantize, || {
            local.layers.iter().zip(&params).map(|(w, p)| quantize_layer(w, p)).collect()
        });

        let packed = timed(&mut timings.pack, || {
            ints.iter()
                .zip(self.schema.layers())
                .map(|(v, spec)| pack_layer(v, &spec.layout))
                .collect::<Result<Vec<PackedLayer>, _>>()
        })?;

        let cts = timed(&mut timings.encrypt, || -> Result<_, ProtocolError> {
            let mut masks = self.prepare_masks(round)?;
            let polys = packed.into_iter().flat_map(PackedLayer::into_polys);
            let mut cts = Vec::with_capacity(masks.len());
            for (index, (coeffs, mask)) in polys.zip(masks.iter_mut()).enumerate() {
                let m = PlaintextPoly::new(&self.ctx, coeffs)?;
                cts.push(bfv::encrypt(&self.ctx, &m, mask, CiphertextTag { round, index: index as u64 })?);
            }
            Ok(cts)
        })?;

        let update = EncryptedUpdate { client_id: self.id, round, cts, quant_meta: quant_meta(&params) };
        Ok((update, timings))
    }

    /// Model update: adopt the aggregate as the new `W^(t)`.
    pub fn client_apply(&mut self, broadcast: &AggregateBroadcast) -> Result<StageTimings, ProtocolError> {
        let (model, timings) =
            apply_broadcast(&self.ctx, &self.schema, broadcast, &self.model, &self.sk, self.padding)?;
        self.model = model;
        Ok(timings)
    }
}

/// Decrypt, unpack, divide by the broadcast's participant count, and dequantize
/// against the ranges derived from `prev`.
pub fn apply_broadcast(
    ctx: &RingContext,
    schema: &ModelSchema,
    broadcast: &AggregateBroadcast,
    prev: &Model,
    sk: &SecretKey,
    padding: QuantPadding,
) -> Result<(Model, StageTimings), ProtocolError> {
    let mut timings = StageTimings::default();
    if broadcast.cts.len() != schema.total_polys() {
        return Err(ProtocolError::Schema(format!(
            "broadcast carries {} ciphertexts, schema needs {}",
            broadcast.cts.len(),
            schema.total_polys()
        )));
    }
    if broadcast.participants == 0 {
        return Err(bitfold_core::PackingError::ZeroParticipants.into());
    }
    if broadcast.participants > schema.max_clients() {
        return Err(ProtocolError::TooManyParticipants {
            participants: broadcast.participants,
            bound: schema.max_clients(),
        });
    }
    let params = quant_params(schema, prev, padding)?;
    let expected_meta = quant_meta(&params);
    if broadcast.quant_meta.len() != expected_meta.len() {
        return Err(ProtocolError::Schema("quantization metadata has the wrong layer count".into()));
    }
    if let Some(layer) = (0..expected_meta.len()).find(|&i| !expected_meta[i].bits_eq(&broadcast.quant_meta[i])) {
        return Err(ProtocolError::QuantMetaMismatch { layer });
    }

    let plaintexts = timed(&mut timings.decrypt, || {
        broadcast.cts.iter().map(|ct| bfv::decrypt(ctx, ct, sk)).collect::<Result<Vec<_>, _>>()
    })?;

    let mut polys = plaintexts.into_iter().map(PlaintextPoly::into_coeffs);
    let mut layers = Vec::with_capacity(schema.layers().len());
    for ((spec, count), p) in schema.layers().iter().zip(schema.poly_counts()).zip(&params) {
        let layer_polys: Vec<Vec<u64>> = polys.by_ref().take(count).collect();
        let sums = timed(&mut timings.unpack, || {
            let packed = PackedLayer::from_polys(layer_polys, spec.layout, spec.weight_count)?;
            unpack_layer(&packed, spec.weight_count)
        })?;
        let weights = timed(&mut timings.dequantize, || -> Result<_, ProtocolError> {
            let avg = average_unpacked(&sums, broadcast.participants)?;
            Ok(dequantize_layer(&avg, p))
        })?;
        layers.push(weights);
    }
    Ok((Model::new(layers), timings))
}
