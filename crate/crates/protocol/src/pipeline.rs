//! Pieces shared by the encrypted pipeline and the plaintext control.

use std::ops::AddAssign;
use std::time::{Duration, Instant};

use bitfold_core::QuantParams;

use crate::error::ProtocolError;
use crate::model::{Model, ModelSchema};
use crate::wire::QuantMeta;

/// Local training step run by a selected client.
pub trait TrainerHook: Sync {
    /// Returns the client's locally trained weights, shaped like `global`.
    fn train(&self, client: u64, round: u64, global: &Model) -> Model;
}

/// Returns the global model unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTrainer;

impl TrainerHook for IdentityTrainer {
    fn train(&self, _client: u64, _round: u64, global: &Model) -> Model {
        global.clone()
    }
}

/// Widening applied to the previous global model's per-layer range before
/// quantizing. Zero padding quantizes strictly inside `[min, max]` of `W^(t−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantPadding {
    pub relative: f64,
    pub absolute: f64,
}

impl QuantPadding {
    pub const NONE: QuantPadding = QuantPadding { relative: 0.0, absolute: 0.0 };
}

impl Default for QuantPadding {
    fn default() -> Self {
        Self { relative: 0.5, absolute: 0.05 }
    }
}

/// Per-layer quantization ranges derived from the previous global model.
pub fn quant_params(
    schema: &ModelSchema,
    reference: &Model,
    padding: QuantPadding,
) -> Result<Vec<QuantParams>, ProtocolError> {
    schema.check_model(reference)?;
    schema
        .layers()
        .iter()
        .zip(&reference.layers)
        .map(|(spec, w)| {
            Ok(QuantParams::from_reference(w, spec.layout.beta)?.widened(padding.relative, padding.absolute)?)
        })
        .collect()
}

pub fn quant_meta(params: &[QuantParams]) -> Vec<QuantMeta> {
    params.iter().map(|p| QuantMeta { lo: p.lo, hi: p.hi }).collect()
}

pub const STAGE_NAMES: [&str; 8] =
    ["train", "quantize", "pack", "encrypt", "aggregate", "decrypt", "unpack", "dequantize"];

/// Wall-clock time per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub train: Duration,
    pub quantize: Duration,
    pub pack: Duration,
    pub encrypt: Duration,
    pub aggregate: Duration,
    pub decrypt: Duration,
    pub unpack: Duration,
    pub dequantize: Duration,
}

impl StageTimings {
    /// In [`STAGE_NAMES`] order.
    pub fn as_array(&self) -> [Duration; 8] {
        [self.train, self.quantize, self.pack, self.encrypt, self.aggregate, self.decrypt, self.unpack, self.dequantize]
    }

    pub fn total(&self) -> Duration {
        self.as_array().iter().sum()
    }

    /// Share of each stage in percent; all zeros if nothing was timed.
    pub fn percentages(&self) -> [f64; 8] {
        let total = self.total().as_secs_f64();
        let mut out = [0.0; 8];
        if total > 0.0 {
            for (o, d) in out.iter_mut().zip(self.as_array()) {
                *o = 100.0 * d.as_secs_f64() / total;
            }
        }
        out
    }

    pub fn div(&self, n: u32) -> StageTimings {
        if n == 0 {
            return *self;
        }
        StageTimings {
            train: self.train / n,
            quantize: self.quantize / n,
            pack: self.pack / n,
            encrypt: self.encrypt / n,
            aggregate: self.aggregate / n,
            decrypt: self.decrypt / n,
            unpack: self.unpack / n,
            dequantize: self.dequantize / n,
        }
    }
}

impl AddAssign for StageTimings {
    fn add_assign(&mut self, o: StageTimings) {
        self.train += o.train;
        self.quantize += o.quantize;
        self.pack += o.pack;
        self.encrypt += o.encrypt;
        self.aggregate += o.aggregate;
        self.decrypt += o.decrypt;
        self.unpack += o.unpack;
        self.dequantize += o.dequantize;
    }
}

/// Runs `f`, adding its wall-clock time to `slot`.
pub(crate) fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}
