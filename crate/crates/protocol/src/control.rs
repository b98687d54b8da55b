//! Plaintext control: the same quantized averaging without packing or encryption.

use bitfold_core::packing::{average_unpacked, dequantize_layer, quantize_layer};

use crate::error::ProtocolError;
use crate::ledger::RoundTraffic;
use crate::model::{Model, ModelSchema};
use crate::pipeline::{quant_params, timed, StageTimings, TrainerHook};
use crate::round::{FederationConfig, RoundOutcome};
use crate::select::select_clients;

#[derive(Debug, Clone)]
pub struct PlaintextControl {
    schema: ModelSchema,
    config: FederationConfig,
    model: Model,
    round: u64,
}

impl PlaintextControl {
    pub fn new(schema: ModelSchema, initial: Model, config: FederationConfig) -> Result<Self, ProtocolError> {
        schema.check_model(&initial)?;
        select_clients(config.clients, config.sample, &config.seed, 0)?;
        Ok(Self { schema, config, model: initial, round: 0 })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn run_round(&mut self, trainer: &dyn TrainerHook) -> Result<RoundOutcome, ProtocolError> {
        let round = self.round + 1;
        let selected = select_clients(self.config.clients, self.config.sample, &self.config.seed, round)?;
        let mut timings = StageTimings::default();
        let params = quant_params(&self.schema, &self.model, self.config.padding)?;

        let mut sums: Vec<Vec<u64>> = self.schema.layers().iter().map(|l| vec![0; l.weight_count]).collect();
        for &id in &selected {
            let local = timed(&mut timings.train, || trainer.train(id, round, &self.model));
            self.schema.check_model(&local)?;
            let ints: Vec<Vec<u64>> = timed(&mut timings.quantize, || {
                local.layers.iter().zip(&params).map(|(w, p)| quantize_layer(w, p)).collect()
            });
            timed(&mut timings.aggregate, || {
                for (acc, v) in sums.iter_mut().zip(&ints) {
                    for (a, x) in acc.iter_mut().zip(v) {
                        *a += x;
                    }
                }
            });
        }
        let layers = timed(&mut timings.dequantize, || {
            sums.iter()
                .zip(&params)
                .map(|(s, p)| Ok(dequantize_layer(&average_unpacked(s, selected.len() as u64)?, p)))
                .collect::<Result<Vec<_>, ProtocolError>>()
        })?;
        self.model = Model::new(layers);
        self.round = round;
        Ok(RoundOutcome { round, selected, model: self.model.clone(), traffic: RoundTraffic::default(), timings })
    }
}
