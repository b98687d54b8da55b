//! Bit-interleaved packing of quantized weights into plaintext coefficients.
//!
//! A coefficient holds `m` fields of `β + δ` bits. Field `k` occupies bits
//! `[k(β+δ), k(β+δ) + β)` with the `δ` bits above it left free, so that
//! adding up to `U` packed coefficients sums each field independently:
//!
//! ```text
//! c = Σ_{k=0}^{m-1} w_k · 2^(k(β+δ))
//! ```
//!
//! Two bounds keep aggregation exact. Carry isolation:
//! `U·(2^β − 1) < 2^(β+δ)`. Plaintext modulus: `U·M < t` with
//! `M = (2^β − 1)·(2^(m(β+δ)) − 1)/(2^(β+δ) − 1)` the largest single packed
//! coefficient.

use num_bigint::{BigInt, BigUint};
use num_traits::One;

use crate::error::{Bound, PackingError};

/// Per-layer packing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldLayout {
    pub beta: u32,
    pub delta: u32,
    pub slots: u32,
    pub max_clients: u64,
    pub ring_degree: usize,
    pub plaintext_modulus: u64,
}

impl FieldLayout {
    /// Builds and validates a layout with an explicit slot count.
    pub fn new(
        beta: u32,
        delta: u32,
        slots: u32,
        max_clients: u64,
        ring_degree: usize,
        plaintext_modulus: u64,
    ) -> Result<Self, PackingError> {
        let layout = Self { beta, delta, slots, max_clients, ring_degree, plaintext_modulus };
        validate_layout(&layout)?;
        Ok(layout)
    }

    /// Layout with the largest feasible slot count.
    pub fn with_max_slots(
        beta: u32,
        delta: u32,
        max_clients: u64,
        ring_degree: usize,
        plaintext_modulus: u64,
    ) -> Result<Self, PackingError> {
        let slots = max_slots(beta, delta, max_clients, plaintext_modulus)?;
        Self::new(beta, delta, slots, max_clients, ring_degree, plaintext_modulus)
    }

    #[inline]
    pub fn field_bits(&self) -> u32 {
        self.beta + self.delta
    }

    /// Weights carried by one polynomial, `m·N`.
    #[inline]
    pub fn weights_per_poly(&self) -> usize {
        self.slots as usize * self.ring_degree
    }

    /// `T = ⌈r / (m·N)⌉`.
    pub fn poly_count(&self, weight_count: usize) -> usize {
        weight_count.div_ceil(self.weights_per_poly())
    }

    pub fn margins(&self) -> Margins {
        margins(self.beta, self.delta, self.slots, self.max_clients, self.plaintext_modulus)
    }
}

/// `M = Σ_{k<m} (2^β − 1)·2^(k(β+δ))`, the largest packed coefficient.
pub fn max_packed_value(beta: u32, delta: u32, slots: u32) -> BigUint {
    let field_max = (BigUint::one() << beta) - 1u32;
    (0..slots).map(|k| &field_max << (k as u64 * (beta + delta) as u64)).sum()
}

/// Signed slack in both feasibility bounds. Positive means satisfied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Margins {
    /// `2^(β+δ) − U·(2^β − 1)`.
    pub carry: BigInt,
    /// `t − U·M`.
    pub modulus: BigInt,
}

pub fn margins(beta: u32, delta: u32, slots: u32, max_clients: u64, t: u64) -> Margins {
    let u = BigInt::from(max_clients);
    let field_max = (BigInt::one() << beta) - 1;
    let carry = (BigInt::one() << (beta + delta)) - &u * field_max;
    let modulus = BigInt::from(t) - u * BigInt::from(max_packed_value(beta, delta, slots));
    Margins { carry, modulus }
}

fn check_carry(beta: u32, delta: u32, max_clients: u64) -> Result<(), PackingError> {
    let lhs = BigUint::from(max_clients) * ((BigUint::one() << beta) - 1u32);
    let rhs = BigUint::one() << (beta + delta);
    if lhs >= rhs {
        return Err(PackingError::Infeasible { bound: Bound::CarryIsolation, lhs, rhs });
    }
    Ok(())
}

fn check_modulus(beta: u32, delta: u32, slots: u32, max_clients: u64, t: u64) -> Result<(), PackingError> {
    let lhs = BigUint::from(max_clients) * max_packed_value(beta, delta, slots);
    let rhs = BigUint::from(t);
    if lhs >= rhs {
        return Err(PackingError::Infeasible { bound: Bound::PlaintextModulus, lhs, rhs });
    }
    Ok(())
}

/// Checks parameter sanity, then carry isolation, then the plaintext-modulus bound.
pub fn validate_layout(layout: &FieldLayout) -> Result<(), PackingError> {
    if layout.beta == 0 || layout.beta > 32 {
        return Err(PackingError::InvalidParameter("beta must be in 1..=32"));
    }
    if layout.field_bits() > 63 {
        return Err(PackingError::InvalidParameter("beta + delta must be at most 63"));
    }
    if layout.slots == 0 {
        return Err(PackingError::InvalidParameter("slots must be at least 1"));
    }
    if layout.max_clients == 0 {
        return Err(PackingError::InvalidParameter("max_clients must be at least 1"));
    }
    if layout.ring_degree == 0 {
        return Err(PackingError::InvalidParameter("ring degree must be positive"));
    }
    check_carry(layout.beta, layout.delta, layout.max_clients)?;
    check_modulus(layout.beta, layout.delta, layout.slots, layout.max_clients, layout.plaintext_modulus)
}

/// Largest `m ≥ 1` with `U·M(m) < t`.
pub fn max_slots(beta: u32, delta: u32, max_clients: u64, t: u64) -> Result<u32, PackingError> {
    if beta == 0 || beta + delta > 63 || max_clients == 0 {
        return Err(PackingError::InvalidParameter("need 1 <= beta, beta + delta <= 63, max_clients >= 1"));
    }
    check_carry(beta, delta, max_clients)?;
    check_modulus(beta, delta, 1, max_clients, t)?;
    let mut m = 1;
    while check_modulus(beta, delta, m + 1, max_clients, t).is_ok() {
        m += 1;
    }
    Ok(m)
}

/// Affine min/max quantization range for one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub lo: f64,
    pub hi: f64,
    pub beta: u32,
}

impl QuantParams {
    pub fn new(lo: f64, hi: f64, beta: u32) -> Result<Self, PackingError> {
        if !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(PackingError::InvalidParameter("quantization range must be finite with hi >= lo"));
        }
        if beta == 0 || beta > 32 {
            return Err(PackingError::InvalidParameter("beta must be in 1..=32"));
        }
        Ok(Self { lo, hi, beta })
    }

    /// Range spanned by `reference`; `[0, 0]` when empty.
    pub fn from_reference(reference: &[f64], beta: u32) -> Result<Self, PackingError> {
        let (lo, hi) = reference
            .iter()
            .fold(None, |acc: Option<(f64, f64)>, &w| match acc {
                None => Some((w, w)),
                Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
            })
            .unwrap_or((0.0, 0.0));
        Self::new(lo, hi, beta)
    }

    /// Widens the range on both sides by `relative·(hi − lo) + absolute`.
    pub fn widened(self, relative: f64, absolute: f64) -> Result<Self, PackingError> {
        let pad = relative * (self.hi - self.lo) + absolute;
        Self::new(self.lo - pad, self.hi + pad, self.beta)
    }

    #[inline]
    fn levels(&self) -> f64 {
        ((1u64 << self.beta) - 1) as f64
    }

    /// Width of one quantization step.
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.levels()
    }
}

/// `clamp(round((w − lo)/(hi − lo)·(2^β − 1)), 0, 2^β − 1)`, all zeros if `hi = lo`.
pub fn quantize_layer(weights: &[f64], params: &QuantParams) -> Vec<u64> {
    let top = (1u64 << params.beta) - 1;
    let span = params.hi - params.lo;
    if span == 0.0 {
        return vec![0; weights.len()];
    }
    let levels = params.levels();
    weights
        .iter()
        .map(|&w| {
            let x = ((w - params.lo) / span * levels).round();
            if x.is_nan() || x <= 0.0 {
                0
            } else {
                (x as u64).min(top)
            }
        })
        .collect()
}

/// `lo + (hi − lo)·v/(2^β − 1)`.
pub fn dequantize_layer(ints: &[u64], params: &QuantParams) -> Vec<f64> {
    let span = params.hi - params.lo;
    if span == 0.0 {
        return vec![params.lo; ints.len()];
    }
    let levels = params.levels();
    ints.iter().map(|&v| params.lo + span * v as f64 / levels).collect()
}

/// One layer's weights packed into `T` plaintext coefficient vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedLayer {
    polys: Vec<Vec<u64>>,
    layout: FieldLayout,
    weight_count: usize,
}

impl PackedLayer {
    /// Wraps coefficient vectors (e.g. decrypted aggregates) for unpacking.
    pub fn from_polys(polys: Vec<Vec<u64>>, layout: FieldLayout, weight_count: usize) -> Result<Self, PackingError> {
        let capacity = polys.len() * layout.weights_per_poly();
        if weight_count > capacity {
            return Err(PackingError::CountMismatch { expected: weight_count, capacity });
        }
        if polys.iter().any(|p| p.len() != layout.ring_degree) {
            return Err(PackingError::InvalidParameter("coefficient vector length differs from ring degree"));
        }
        Ok(Self { polys, layout, weight_count })
    }

    pub fn polys(&self) -> &[Vec<u64>] {
        &self.polys
    }

    pub fn into_polys(self) -> Vec<Vec<u64>> {
        self.polys
    }

    pub fn layout(&self) -> &FieldLayout {
        &self.layout
    }

    pub fn weight_count(&self) -> usize {
        self.weight_count
    }
}

/// Places weight `(iN + j)m + k` into field `k` of coefficient `j` of polynomial `i`.
pub fn pack_layer(ints: &[u64], layout: &FieldLayout) -> Result<PackedLayer, PackingError> {
    validate_layout(layout)?;
    let limit = 1u64 << layout.beta;
    if let Some((index, &value)) = ints.iter().enumerate().find(|(_, &w)| w >= limit) {
        return Err(PackingError::WeightOutOfRange { index, value, beta: layout.beta });
    }
    let n = layout.ring_degree;
    let m = layout.slots as usize;
    let width = layout.field_bits();
    let count = layout.poly_count(ints.len());
    let mut polys = vec![vec![0u64; n]; count];
    for (idx, &w) in ints.iter().enumerate() {
        let coeff = idx / m;
        let k = idx % m;
        polys[coeff / n][coeff % n] |= w << (k as u32 * width);
    }
    Ok(PackedLayer { polys, layout: *layout, weight_count: ints.len() })
}

/// Extracts field `k` as `(c >> k(β+δ)) mod 2^(β+δ)` and keeps the first `expected_count`.
pub fn unpack_layer(packed: &PackedLayer, expected_count: usize) -> Result<Vec<u64>, PackingError> {
    let layout = &packed.layout;
    let capacity = packed.polys.len() * layout.weights_per_poly();
    if expected_count > capacity {
        return Err(PackingError::CountMismatch { expected: expected_count, capacity });
    }
    let t = layout.plaintext_modulus;
    let width = layout.field_bits();
    let mask = (1u64 << width) - 1;
    let m = layout.slots as usize;
    let mut out = Vec::with_capacity(expected_count);
    'outer: for (i, poly) in packed.polys.iter().enumerate() {
        for (j, &c) in poly.iter().enumerate() {
            if c >= t {
                return Err(PackingError::CoefficientOutOfRange { index: i * layout.ring_degree + j, value: c, t });
            }
            for k in 0..m {
                if out.len() == expected_count {
                    break 'outer;
                }
                out.push((c >> (k as u32 * width)) & mask);
            }
        }
    }
    Ok(out)
}

/// Rounded division by the participant count, ties away from zero: `⌊(v + ⌊U/2⌋)/U⌋`.
pub fn average_unpacked(sums: &[u64], participants: u64) -> Result<Vec<u64>, PackingError> {
    if participants == 0 {
        return Err(PackingError::ZeroParticipants);
    }
    let half = participants / 2;
    Ok(sums.iter().map(|&v| (v + half) / participants).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: u64 = 2_281_701_377;

    fn fig3_layout() -> FieldLayout {
        FieldLayout::new(8, 2, 2, 3, 4, T).unwrap()
    }

    #[test]
    fn worked_packing_example() {
        let layout = fig3_layout();
        let packed = pack_layer(&[0, 9], &layout).unwrap();
        assert_eq!(packed.polys()[0][0], 9216);

        let agg = PackedLayer::from_polys(vec![vec![368_919, 0, 0, 0]], layout, 2).unwrap();
        let sums = unpack_layer(&agg, 2).unwrap();
        assert_eq!(sums, vec![279, 360]);
        assert_eq!(average_unpacked(&sums, 3).unwrap(), vec![93, 120]);
    }

    #[test]
    fn max_slots_examples() {
        assert_eq!(max_slots(12, 3, 5, T).unwrap(), 2);
        assert_eq!(max_slots(8, 3, 5, T).unwrap(), 2);
        assert_eq!(max_slots(6, 3, 5, T).unwrap(), 3);
        assert!(matches!(max_slots(8, 2, 5, T), Err(PackingError::Infeasible { bound: Bound::CarryIsolation, .. })));
    }

    #[test]
    fn validate_examples() {
        assert!(FieldLayout::new(8, 2, 2, 3, 4096, T).is_ok());
        let err = FieldLayout::new(8, 2, 2, 5, 4096, T).unwrap_err();
        assert_eq!(
            err,
            PackingError::Infeasible {
                bound: Bound::CarryIsolation,
                lhs: BigUint::from(1275u32),
                rhs: BigUint::from(1024u32)
            }
        );
        assert!(FieldLayout::new(8, 0, 1, 1, 4096, T).is_ok());
        assert!(matches!(
            FieldLayout::new(12, 3, 3, 5, 4096, T),
            Err(PackingError::Infeasible { bound: Bound::PlaintextModulus, .. })
        ));
        assert!(FieldLayout::new(8, 2, 0, 3, 4096, T).is_err());
        assert!(FieldLayout::new(0, 2, 1, 3, 4096, T).is_err());
    }

    #[test]
    fn margin_examples() {
        for beta in 1..=16 {
            assert_eq!(margins(beta, 0, 1, 1, T).carry, BigInt::one());
        }
        let m = margins(8, 2, 2, 5, T);
        assert_eq!(m.carry, BigInt::from(1024 - 1275));
    }

    #[test]
    fn quantize_examples() {
        let p = QuantParams::new(-1.0, 1.0, 8).unwrap();
        assert_eq!(quantize_layer(&[-1.0, 1.0, 0.0, -5.0, 5.0], &p), vec![0, 255, 128, 0, 255]);
        let flat = QuantParams::new(0.5, 0.5, 8).unwrap();
        assert_eq!(quantize_layer(&[0.5, 1.0, -3.0], &flat), vec![0, 0, 0]);
        assert_eq!(dequantize_layer(&[0, 7], &flat), vec![0.5, 0.5]);

        let d = dequantize_layer(&[0, 255, 128], &p);
        assert_eq!(d[0], -1.0);
        assert_eq!(d[1], 1.0);
        assert!((d[2] - 0.003_921_568_627_45).abs() < 1e-12);

        assert!(QuantParams::new(1.0, 0.0, 8).is_err());
        assert!(QuantParams::new(f64::NAN, 0.0, 8).is_err());
        let r = QuantParams::from_reference(&[0.3, -0.2, 0.1], 6).unwrap();
        assert_eq!((r.lo, r.hi), (-0.2, 0.3));
    }

    #[test]
    fn pack_shapes() {
        let layout = FieldLayout::new(12, 3, 2, 5, 4096, T).unwrap();
        let zeros = pack_layer(&vec![0; 20_000], &layout).unwrap();
        assert_eq!(zeros.polys().len(), 3);
        assert!(zeros.polys().iter().flatten().all(|&c| c == 0));
        assert!(pack_layer(&[], &layout).unwrap().polys().is_empty());

        let ones = pack_layer(&vec![1; 8193], &layout).unwrap();
        assert_eq!(ones.polys().len(), 2);
        assert_eq!(ones.polys()[1][0], 1);
        assert!(ones.polys()[1][1..].iter().all(|&c| c == 0));

        assert!(matches!(
            pack_layer(&[4096], &layout),
            Err(PackingError::WeightOutOfRange { index: 0, value: 4096, beta: 12 })
        ));
    }

    #[test]
    fn unpack_rejections() {
        let layout = fig3_layout();
        let bad = PackedLayer::from_polys(vec![vec![T, 0, 0, 0]], layout, 2).unwrap();
        assert!(matches!(unpack_layer(&bad, 2), Err(PackingError::CoefficientOutOfRange { index: 0, .. })));
        let ok = pack_layer(&[1, 2, 3], &layout).unwrap();
        assert!(matches!(unpack_layer(&ok, 9), Err(PackingError::CountMismatch { .. })));
    }

    #[test]
    fn average_examples() {
        assert_eq!(average_unpacked(&[7], 2).unwrap(), vec![4]);
        assert_eq!(average_unpacked(&[5, 6], 1).unwrap(), vec![5, 6]);
        assert_eq!(average_unpacked(&[1], 0), Err(PackingError::ZeroParticipants));
    }

    fn layout_strategy() -> impl Strategy<Value = (u32, u32, u32)> {
        (1u32..=16, 0u32..=4, 1u32..=3).prop_filter("field fits 20 bits", |(b, d, _)| b + d <= 20)
    }

    proptest! {
        #[test]
        fn single_client_roundtrip((beta, delta, slots) in layout_strategy(), len in 0usize..200, seed in any::<u64>()) {
            let layout = FieldLayout::new(beta, delta, slots, 1, 8, 1 << 62).unwrap();
            let mut x = seed;
            let ws: Vec<u64> = (0..len).map(|_| { x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (x >> 33) % (1 << beta) }).collect();
            let packed = pack_layer(&ws, &layout).unwrap();
            prop_assert_eq!(packed.polys().len(), len.div_ceil(slots as usize * 8));
            prop_assert_eq!(unpack_layer(&packed, len).unwrap(), ws);
        }

        #[test]
        fn aggregation_is_lossless((beta, delta, slots) in layout_strategy(), clients in 1u64..=8, len in 1usize..100, seed in any::<u64>()) {
            // largest U the carry bound admits, capped by `clients`
            let max_u = ((1u64 << (beta + delta)) - 1) / ((1u64 << beta) - 1);
            let u = clients.min(max_u).max(1);
            prop_assume!(check_carry(beta, delta, u).is_ok());
            let layout = FieldLayout::new(beta, delta, slots, u, 8, 1 << 62).unwrap();
            let mut x = seed;
            let vectors: Vec<Vec<u64>> = (0..u).map(|_| (0..len).map(|_| { x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (x >> 33) % (1 << beta) }).collect()).collect();
            let packed: Vec<PackedLayer> = vectors.iter().map(|v| pack_layer(v, &layout).unwrap()).collect();
            let summed: Vec<Vec<u64>> = (0..packed[0].polys().len())
                .map(|i| (0..8).map(|j| packed.iter().map(|p| p.polys()[i][j]).sum()).collect())
                .collect();
            let agg = PackedLayer::from_polys(summed, layout, len).unwrap();
            let expected: Vec<u64> = (0..len).map(|i| vectors.iter().map(|v| v[i]).sum()).collect();
            prop_assert_eq!(unpack_layer(&agg, len).unwrap(), expected);
        }
    }
}
