//! Seeded samplers for `a`, `e` and `s`.
//!
//! Every sampler is a pure function of `(seed, ctx)`.

use std::sync::OnceLock;

use rand::{Rng, RngCore};

use crate::ring::{Domain, Polynomial, RingContext};
use crate::seed::Seed;

/// Standard deviation of the error distribution.
pub const ERROR_STDDEV: f64 = 3.2;
/// Tail cut: `⌈6σ⌉ − 1`, so `|e| ≤ 19`.
pub const ERROR_BOUND: i64 = 19;

/// Uniform element of `R_q`: one draw in `[0, q)` per coefficient, then reduced per limb.
pub fn sample_uniform(seed: &Seed, ctx: &RingContext) -> Polynomial {
    let mut rng = seed.rng();
    let q = ctx.q_words();
    let top_bits = 64 - q[q.len() - 1].leading_zeros();
    let top_mask = if top_bits == 64 { u64::MAX } else { (1u64 << top_bits) - 1 };
    let n = ctx.n();
    let mut draw = vec![0u64; q.len()];
    let mut p = Polynomial::zero(ctx, Domain::Coefficient);
    let moduli: Vec<u64> = ctx.limbs().iter().map(|m| m.value()).collect();
    let residues = p.residues_mut();
    for j in 0..n {
        loop {
            for w in draw.iter_mut() {
                *w = rng.next_u64();
            }
            *draw.last_mut().unwrap() &= top_mask;
            if less_than(&draw, q) {
                break;
            }
        }
        for (i, &m) in moduli.iter().enumerate() {
            residues[i * n + j] = reduce_words(&draw, m);
        }
    }
    p
}

fn less_than(a: &[u64], b: &[u64]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn reduce_words(words: &[u64], m: u64) -> u64 {
    words.iter().rev().fold(0u64, |acc, &w| ((((acc as u128) << 64) | w as u128) % m as u128) as u64)
}

/// Cumulative distribution of the truncated discrete Gaussian over
/// `[−ERROR_BOUND, ERROR_BOUND]`, scaled to `2^64`.
fn gaussian_cdt() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let weights: Vec<f64> = (-ERROR_BOUND..=ERROR_BOUND)
            .map(|x| (-((x * x) as f64) / (2.0 * ERROR_STDDEV * ERROR_STDDEV)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdt: Vec<u64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                (acc * 18_446_744_073_709_551_616.0).min(u64::MAX as f64) as u64
            })
            .collect();
        *cdt.last_mut().unwrap() = u64::MAX;
        cdt
    })
}

/// Signed error coefficients, exposed for statistical tests and noise analysis.
pub fn sample_error_coeffs(seed: &Seed, n: usize) -> Vec<i64> {
    let cdt = gaussian_cdt();
    let mut rng = seed.rng();
    (0..n)
        .map(|_| {
            let u = rng.next_u64();
            let idx = cdt.partition_point(|&c| c < u);
            idx as i64 - ERROR_BOUND
        })
        .collect()
}

/// Centered discrete Gaussian error, σ = 3.2, truncated at ±19.
pub fn sample_error(seed: &Seed, ctx: &RingContext) -> Polynomial {
    Polynomial::from_signed(ctx, &sample_error_coeffs(seed, ctx.n()))
}

/// Binary secret with independent fair bits.
pub fn sample_secret(seed: &Seed, ctx: &RingContext) -> Polynomial {
    let mut rng = seed.rng();
    let bits: Vec<i64> = (0..ctx.n()).map(|_| rng.gen_range(0..=1)).collect();
    Polynomial::from_signed(ctx, &bits)
}
