//! CRT lift out of RNS and the `t/q` rescaling used by decryption.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::RingError;
use crate::ring::{BigCoefficientVector, Domain, Polynomial, RingContext, WideLift};

/// Lifts each coefficient to the unique `x ∈ [0, q)` matching every limb residue.
pub fn crt_reconstruct(ctx: &RingContext, p: &Polynomial) -> Result<BigCoefficientVector, RingError> {
    check_coefficient_form(ctx, p)?;
    let n = ctx.n();
    let coeffs = match ctx.wide() {
        Some(w) => (0..n).map(|j| BigUint::from(lift_wide(ctx, w, p, j))).collect(),
        None => (0..n).map(|j| lift_big(ctx, p, j)).collect(),
    };
    Ok(BigCoefficientVector(coeffs))
}

/// `⌊(t·v + ⌊q/2⌋) / q⌋ mod t` per coefficient.
pub fn scale_round_mod_t(ctx: &RingContext, v: &BigCoefficientVector) -> Vec<u64> {
    v.coeffs().iter().map(|x| scale_round_big(ctx, x)).collect()
}

/// CRT lift followed by `t/q` rounding, without intermediate allocation when
/// `q` fits in 126 bits.
pub fn lift_and_scale(ctx: &RingContext, p: &Polynomial) -> Result<Vec<u64>, RingError> {
    check_coefficient_form(ctx, p)?;
    let n = ctx.n();
    Ok(match ctx.wide() {
        Some(w) => (0..n).map(|j| scale_round_wide(lift_wide(ctx, w, p, j), ctx.t(), w)).collect(),
        None => (0..n).map(|j| scale_round_big(ctx, &lift_big(ctx, p, j))).collect(),
    })
}

fn check_coefficient_form(ctx: &RingContext, p: &Polynomial) -> Result<(), RingError> {
    if p.domain() != Domain::Coefficient {
        return Err(RingError::DomainMismatch { expected: Domain::Coefficient, found: p.domain() });
    }
    if p.residues().len() != ctx.poly_len() {
        return Err(RingError::ShapeMismatch { expected: ctx.poly_len(), found: p.residues().len() });
    }
    Ok(())
}

fn lift_big(ctx: &RingContext, p: &Polynomial, j: usize) -> BigUint {
    let n = ctx.n();
    let mut acc = BigUint::default();
    for (i, (m, cofactor, inv)) in ctx.crt_terms().enumerate() {
        let y = m.mul(p.residues()[i * n + j], inv);
        acc += cofactor * y;
    }
    // acc < limbs · q
    while &acc >= ctx.q() {
        acc -= ctx.q();
    }
    acc
}

/// Garner: `x = r_0 + p_0·((r_1 − r_0)·p_0^-1 mod p_1)`.
#[inline]
fn lift_wide(ctx: &RingContext, w: WideLift, p: &Polynomial, j: usize) -> u128 {
    let r0 = p.residues()[j];
    let limbs = ctx.limbs();
    if limbs.len() == 1 {
        return r0 as u128;
    }
    let m1 = &limbs[1];
    let r1 = p.residues()[ctx.n() + j];
    let k = m1.mul(m1.sub(r1, m1.reduce(r0)), w.p0_inv);
    r0 as u128 + limbs[0].value() as u128 * k as u128
}

fn scale_round_big(ctx: &RingContext, x: &BigUint) -> u64 {
    let t = ctx.t();
    let r = (x * t + ctx.half_q()) / ctx.q();
    (r % t).to_u64().expect("reduced mod t")
}

/// Long multiplication of `t·x` over the bits of `t`, keeping the running
/// product as `quotient·q + remainder` so every intermediate stays below `2q`.
#[inline]
fn scale_round_wide(x: u128, t: u64, w: WideLift) -> u64 {
    let (mut quot, mut rem) = (0u64, 0u128);
    for bit in (0..64 - t.leading_zeros()).rev() {
        quot <<= 1;
        rem <<= 1;
        if rem >= w.q {
            rem -= w.q;
            quot += 1;
        }
        if (t >> bit) & 1 == 1 {
            rem += x;
            if rem >= w.q {
                rem -= w.q;
                quot += 1;
            }
        }
    }
    if rem + w.half_q >= w.q {
        quot += 1;
    }
    quot % t
}
