//! Model schema and weight containers.

use bitfold_core::FieldLayout;

use crate::error::ProtocolError;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub weight_count: usize,
    pub layout: FieldLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSchema {
    layers: Vec<LayerSpec>,
}

impl ModelSchema {
    /// Every layout must be valid and agree on ring degree and plaintext modulus.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self, ProtocolError> {
        for l in &layers {
            bitfold_core::packing::validate_layout(&l.layout)?;
        }
        if let Some(first) = layers.first() {
            for l in &layers[1..] {
                if l.layout.ring_degree != first.layout.ring_degree
                    || l.layout.plaintext_modulus != first.layout.plaintext_modulus
                {
                    return Err(ProtocolError::Schema(format!("layer {} uses a different ring", l.name)));
                }
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// `T_ℓ` per layer.
    pub fn poly_counts(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.layout.poly_count(l.weight_count)).collect()
    }

    /// `Σ T_ℓ`.
    pub fn total_polys(&self) -> usize {
        self.poly_counts().iter().sum()
    }

    /// Smallest client bound over all layers.
    pub fn max_clients(&self) -> u64 {
        self.layers.iter().map(|l| l.layout.max_clients).min().unwrap_or(u64::MAX)
    }

    pub fn check_model(&self, model: &Model) -> Result<(), ProtocolError> {
        if model.layers.len() != self.layers.len() {
            return Err(ProtocolError::Schema(format!(
                "model has {} layers, schema has {}",
                model.layers.len(),
                self.layers.len()
            )));
        }
        for (w, spec) in model.layers.iter().zip(&self.layers) {
            if w.len() != spec.weight_count {
                return Err(ProtocolError::Schema(format!(
                    "layer {} has {} weights, expected {}",
                    spec.name,
                    w.len(),
                    spec.weight_count
                )));
            }
        }
        Ok(())
    }
}

/// Per-layer real-valued weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Model {
    pub layers: Vec<Vec<f64>>,
}

impl Model {
    pub fn new(layers: Vec<Vec<f64>>) -> Self {
        Self { layers }
    }

    pub fn zeros(schema: &ModelSchema) -> Self {
        Self { layers: schema.layers().iter().map(|l| vec![0.0; l.weight_count]).collect() }
    }

    /// Bitwise equality of every weight (distinguishes `-0.0` and NaN payloads).
    pub fn bits_eq(&self, other: &Model) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}
