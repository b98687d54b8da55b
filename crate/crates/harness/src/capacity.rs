//! Slot capacity and expansion for a range of quantization widths.

use std::fmt::Write;

use num_bigint::BigInt;

use bitfold_core::packing::{margins, max_slots};
use bitfold_core::{FieldLayout, RingContext};
use bitfold_protocol::{LayerSpec, ModelSchema};

use crate::traffic::predict_traffic;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub beta: u32,
    pub delta: u32,
    pub clients: u64,
    /// `None` when not even one slot fits.
    pub slots: Option<u32>,
    pub violation: Option<String>,
    pub ciphertexts: Option<u64>,
    /// Upload plus download bytes per weight of the reference model.
    pub bytes_per_weight: Option<f64>,
    /// `2·log2(q)/m`: ciphertext bits carried per packed weight.
    pub payload_bits_per_weight: Option<f64>,
    /// Margins at the chosen slot count, or at one slot for infeasible rows.
    pub carry_margin: BigInt,
    pub modulus_margin: BigInt,
}

pub fn capacity_table(
    ctx: &RingContext,
    clients: u64,
    betas: &[u32],
    delta: u32,
    reference_weights: usize,
) -> Vec<CapacityRow> {
    let t = ctx.t();
    betas
        .iter()
        .map(|&beta| {
            let slots = max_slots(beta, delta, clients, t);
            let m = *slots.as_ref().unwrap_or(&1);
            let mg = margins(beta, delta, m, clients, t);
            let mut row = CapacityRow {
                beta,
                delta,
                clients,
                slots: None,
                violation: None,
                ciphertexts: None,
                bytes_per_weight: None,
                payload_bits_per_weight: None,
                carry_margin: mg.carry,
                modulus_margin: mg.modulus,
            };
            let layout = slots.and_then(|m| FieldLayout::new(beta, delta, m, clients, ctx.n(), t));
            match layout {
                Ok(layout) => {
                    let schema = ModelSchema::new(vec![LayerSpec {
                        name: "reference".into(),
                        weight_count: reference_weights,
                        layout,
                    }])
                    .expect("layout was validated");
                    let p = predict_traffic(&schema, ctx);
                    row.slots = Some(layout.slots);
                    row.ciphertexts = Some(p.ciphertexts);
                    row.bytes_per_weight = Some(p.bytes_per_weight(reference_weights));
                    row.payload_bits_per_weight = Some(2.0 * ctx.log2_q() / layout.slots as f64);
                }
                Err(e) => row.violation = Some(e.to_string()),
            }
            row
        })
        .collect()
}

pub fn format_table(rows: &[CapacityRow], reference_weights: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "reference model: {reference_weights} weights");
    let _ = writeln!(
        out,
        "{:>4} {:>3} {:>4} {:>5} {:>4} {:>14} {:>13} {:>12} {:>14}",
        "beta", "dlt", "U", "slots", "T", "bytes/weight", "bits/weight", "carry", "modulus"
    );
    for r in rows {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>4} {:>3} {:>4} {:>5} {:>4} {:>14} {:>13} {:>12} {:>14}{}",
            r.beta,
            r.delta,
            r.clients,
            opt(r.slots.map(|m| m.to_string())),
            opt(r.ciphertexts.map(|t| t.to_string())),
            opt(r.bytes_per_weight.map(|b| format!("{b:.3}"))),
            opt(r.payload_bits_per_weight.map(|b| format!("{b:.2}"))),
            r.carry_margin,
            r.modulus_margin,
            r.violation.as_ref().map(|v| format!("  INFEASIBLE: {v}")).unwrap_or_default(),
        );
    }
    out
}
