//! Experiment configuration: JSON file plus command-line overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use bitfold_core::ring::{DEFAULT_DEGREE, DEFAULT_LIMBS, DEFAULT_PLAINTEXT_MODULUS};
use bitfold_core::{FieldLayout, RingContext, Seed};
use bitfold_protocol::{FederationConfig, LayerSpec, ModelSchema, QuantPadding};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    /// Logistic regression on synthetic blobs; needs layers `[d, 1]`.
    Logistic,
    /// Returns the global model unchanged.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Mem,
    Socket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub samples_per_client: usize,
    pub test_samples: usize,
    /// Distance between the two class means.
    pub separation: f64,
    /// 0 gives balanced shards; 1 gives single-class shards at the extremes.
    pub non_iid_skew: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            local_epochs: 5,
            samples_per_client: 200,
            test_samples: 2000,
            separation: 5.0,
            non_iid_skew: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaddingConfig {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for PaddingConfig {
    fn default() -> Self {
        let p = QuantPadding::default();
        Self { relative: p.relative, absolute: p.absolute }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ring_degree: usize,
    pub limbs: usize,
    pub plaintext_modulus: u64,
    pub beta: u32,
    pub delta: u32,
    /// Total clients `U`.
    pub clients: usize,
    /// Clients aggregated per round `M`.
    pub sample: usize,
    pub rounds: u64,
    pub seed: u64,
    /// Weights per layer.
    pub layers: Vec<usize>,
    pub trainer: TrainerKind,
    pub transport: TransportKind,
    pub out: PathBuf,
    pub plaintext_control: bool,
    pub padding: PaddingConfig,
    pub timeout_secs: u64,
    pub toy: ToyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ring_degree: DEFAULT_DEGREE,
            limbs: DEFAULT_LIMBS,
            plaintext_modulus: DEFAULT_PLAINTEXT_MODULUS,
            beta: 8,
            delta: 3,
            clients: 10,
            sample: 5,
            rounds: 100,
            seed: 1,
            layers: vec![16, 1],
            trainer: TrainerKind::Logistic,
            transport: TransportKind::Mem,
            out: PathBuf::from("out"),
            plaintext_control: false,
            padding: PaddingConfig::default(),
            timeout_secs: 30,
            toy: ToyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path.to_path_buf()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn ring(&self) -> Result<Arc<RingContext>, HarnessError> {
        Ok(Arc::new(RingContext::with_default_limbs(self.ring_degree, self.limbs, self.plaintext_modulus)?))
    }

    /// Every layer packed with the largest slot count feasible for `sample` clients.
    pub fn layout(&self) -> Result<FieldLayout, HarnessError> {
        Ok(FieldLayout::with_max_slots(
            self.beta,
            self.delta,
            self.sample as u64,
            self.ring_degree,
            self.plaintext_modulus,
        )?)
    }

    pub fn schema(&self) -> Result<ModelSchema, HarnessError> {
        let layout = self.layout()?;
        let names = self.layer_names();
        Ok(ModelSchema::new(
            self.layers
                .iter()
                .zip(names)
                .map(|(&weight_count, name)| LayerSpec { name, weight_count, layout })
                .collect(),
        )?)
    }

    fn layer_names(&self) -> Vec<String> {
        if self.trainer == TrainerKind::Logistic && self.layers.len() == 2 {
            return vec!["dense".into(), "bias".into()];
        }
        (0..self.layers.len()).map(|i| format!("layer{i}")).collect()
    }

    pub fn federation(&self) -> FederationConfig {
        FederationConfig::new(self.clients, self.sample, Seed::from_u64(self.seed))
            .with_padding(QuantPadding { relative: self.padding.relative, absolute: self.padding.absolute })
            .with_timeout(std::time::Duration::from_secs(self.timeout_secs))
    }

    /// Checks everything that can fail before the first round.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.sample == 0 || self.sample > self.clients {
            return Err(HarnessError::Config(format!(
                "sample size {} must be between 1 and the client count {}",
                self.sample, self.clients
            )));
        }
        if self.layers.is_empty() {
            return Err(HarnessError::Config("model needs at least one layer".into()));
        }
        if self.trainer == TrainerKind::Logistic
            && (self.layers.len() != 2 || self.layers[1] != 1 || self.layers[0] == 0)
        {
            return Err(HarnessError::Config("the logistic trainer needs layers [features, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.toy.non_iid_skew) {
            return Err(HarnessError::Config("non_iid_skew must lie in [0, 1]".into()));
        }
        if self.padding.relative < 0.0 || self.padding.absolute < 0.0 {
            return Err(HarnessError::Config("padding must be non-negative".into()));
        }
        self.ring()?;
        self.schema()?;
        Ok(())
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<u64>,
    pub beta: Option<u32>,
    pub delta: Option<u32>,
    pub clients: Option<usize>,
    pub sample: Option<usize>,
    pub transport: Option<TransportKind>,
    pub out: Option<PathBuf>,
    pub plaintext_control: bool,
}

impl Overrides {
    pub fn apply(&self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { c.$f = v; })* };
        }
        set!(seed, rounds, beta, delta, clients, sample, transport, out);
        c.plaintext_control |= self.plaintext_control;
    }
}
