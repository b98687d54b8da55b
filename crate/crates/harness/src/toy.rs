//! Logistic regression on seeded two-class Gaussian blobs.

use rand::Rng;
use rand_distr::StandardNormal;

use bitfold_core::Seed;
use bitfold_protocol::{Model, TrainerHook};

use crate::config::ToyConfig;

const STREAM_DIRECTION: u64 = 0x646972;
const STREAM_SHARD: u64 = 0x7368617264;
const STREAM_TEST: u64 = 0x74657374;

/// Row-major samples with 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub features: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }
}

#[derive(Debug, Clone)]
pub struct ToyTask {
    features: usize,
    shards: Vec<Shard>,
    test: Shard,
    learning_rate: f64,
    local_epochs: usize,
}

impl ToyTask {
    /// Class means sit at `±separation/2` along a seeded unit direction. Client `i`
    /// of `U` holds a positive-class fraction of `0.5 + skew·(i/(U−1) − 0.5)`.
    pub fn generate(features: usize, clients: usize, seed: &Seed, cfg: &ToyConfig) -> Self {
        let mut rng = seed.derive(STREAM_DIRECTION, 0).rng();
        let scale = 0.5 * cfg.separation / (features as f64).sqrt();
        let mean: Vec<f64> = (0..features).map(|_| if rng.gen::<bool>() { scale } else { -scale }).collect();

        let shards = (0..clients)
            .map(|i| {
                let frac = if clients > 1 { i as f64 / (clients - 1) as f64 } else { 0.5 };
                let positive = 0.5 + cfg.non_iid_skew * (frac - 0.5);
                let n = cfg.samples_per_client;
                let n_pos = (positive * n as f64).round() as usize;
                blobs(&mean, n_pos, n - n_pos, &seed.derive(STREAM_SHARD, i as u64))
            })
            .collect();
        let half = cfg.test_samples / 2;
        let test = blobs(&mean, half, cfg.test_samples - half, &seed.derive(STREAM_TEST, 0));
        Self { features, shards, test, learning_rate: cfg.learning_rate, local_epochs: cfg.local_epochs }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn shard(&self, client: usize) -> &Shard {
        &self.shards[client]
    }

    pub fn test_set(&self) -> &Shard {
        &self.test
    }

    /// Mean cross-entropy and accuracy on the held-out set.
    pub fn evaluate(&self, model: &Model) -> (f64, f64) {
        evaluate(&self.test, &model.layers[0], model.layers[1][0])
    }
}

impl TrainerHook for ToyTask {
    /// Full-batch gradient descent for `local_epochs` steps on the client's shard.
    fn train(&self, client: u64, _round: u64, global: &Model) -> Model {
        let shard = &self.shards[client as usize];
        let mut w = global.layers[0].clone();
        let mut b = global.layers[1][0];
        let n = shard.len().max(1) as f64;
        for _ in 0..self.local_epochs {
            let mut gw = vec![0.0; w.len()];
            let mut gb = 0.0;
            for i in 0..shard.len() {
                let x = shard.row(i);
                let err = sigmoid(dot(&w, x) + b) - shard.y[i];
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g += err * xi;
                }
                gb += err;
            }
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= self.learning_rate * g / n;
            }
            b -= self.learning_rate * gb / n;
        }
        Model::new(vec![w, vec![b]])
    }
}

fn blobs(mean: &[f64], positive: usize, negative: usize, seed: &Seed) -> Shard {
    let mut rng = seed.rng();
    let features = mean.len();
    let mut x = Vec::with_capacity((positive + negative) * features);
    let mut y = Vec::with_capacity(positive + negative);
    for i in 0..positive + negative {
        let sign = if i < positive { 1.0 } else { -1.0 };
        for m in mean {
            let noise: f64 = rng.sample(StandardNormal);
            x.push(sign * m + noise);
        }
        y.push(if i < positive { 1.0 } else { 0.0 });
    }
    Shard { features, x, y }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn evaluate(data: &Shard, w: &[f64], b: f64) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 0.0);
    }
    let (mut loss, mut correct) = (0.0, 0usize);
    for i in 0..data.len() {
        let z = dot(w, data.row(i)) + b;
        let y = data.y[i];
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        if (z > 0.0) == (y > 0.5) {
            correct += 1;
        }
    }
    (loss / data.len() as f64, correct as f64 / data.len() as f64)
}
