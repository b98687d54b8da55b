//! Symmetric-key, add-only BFV with a three-stage dataflow.
//!
//! 1. *Preparation*: per plaintext polynomial, sample fresh `a` and `e` and
//!    precompute `b = a·s + e` (coefficient domain) and `NTT(−a)`.
//! 2. *Encryption*: `c0 = b + Δ·m`, `c1 = NTT(−a)`. No transform on the hot path.
//! 3. *Decryption*: `m = ⌊(c0 + INTT(c1 ⊙ NTT(s))) · t/q⌉ mod t`.
//!
//! Aggregation adds `c0` coefficient-wise and `c1` in the NTT domain.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::crt::{crt_reconstruct, lift_and_scale};
use crate::error::BfvError;
use crate::ring::{Domain, Polynomial, RingContext};
use crate::sampling::{sample_error, sample_secret, sample_uniform};
use crate::seed::Seed;

const STREAM_UNIFORM: u64 = 0x61;
const STREAM_ERROR: u64 = 0x65;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    s: Polynomial,
    s_ntt: Polynomial,
}

impl SecretKey {
    /// Wraps an explicit coefficient-domain secret. Used by tests that force `s = 0`.
    pub fn from_polynomial(ctx: &RingContext, s: Polynomial) -> Result<Self, BfvError> {
        let s_ntt = ctx.ntt_forward(&s)?;
        Ok(Self { s, s_ntt })
    }

    pub fn s(&self) -> &Polynomial {
        &self.s
    }

    pub fn s_ntt(&self) -> &Polynomial {
        &self.s_ntt
    }
}

/// Binary secret key derived from `seed`, with its NTT form cached.
pub fn keygen(ctx: &RingContext, seed: &Seed) -> SecretKey {
    let s = sample_secret(seed, ctx);
    SecretKey::from_polynomial(ctx, s).expect("sampled secret has the context's shape")
}

/// Precomputed `(a·s + e, NTT(−a))` for exactly one encryption.
///
/// Deliberately not `Clone`: the only copy is consumed by [`encrypt`].
#[derive(Debug)]
pub struct EncryptionMask {
    id: Seed,
    b: Polynomial,
    neg_a_ntt: Polynomial,
    consumed: bool,
}

impl EncryptionMask {
    /// Seed the mask was derived from; unique per mask within a run.
    pub fn id(&self) -> Seed {
        self.id
    }

    pub fn b(&self) -> &Polynomial {
        &self.b
    }

    pub fn neg_a_ntt(&self) -> &Polynomial {
        &self.neg_a_ntt
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// Samples `a` and `e` from streams of `seed` and precomputes the mask.
pub fn prepare_mask(ctx: &RingContext, sk: &SecretKey, seed: &Seed) -> EncryptionMask {
    let a = sample_uniform(&seed.derive(STREAM_UNIFORM, 0), ctx);
    let e = sample_error(&seed.derive(STREAM_ERROR, 0), ctx);
    prepare_mask_from_parts(ctx, sk, *seed, &a, &e).expect("sampled polynomials have the context's shape")
}

/// Mask from explicit `a` and `e`, both in the coefficient domain.
pub fn prepare_mask_from_parts(
    ctx: &RingContext,
    sk: &SecretKey,
    id: Seed,
    a: &Polynomial,
    e: &Polynomial,
) -> Result<EncryptionMask, BfvError> {
    let a_ntt = ctx.ntt_forward(a)?;
    let mut b = ctx.poly_mul(&a_ntt, sk.s_ntt())?;
    ctx.ntt_inverse_in_place(&mut b)?;
    ctx.poly_add_assign(&mut b, e)?;
    let neg_a_ntt = ctx.poly_neg(&a_ntt)?;
    Ok(EncryptionMask { id, b, neg_a_ntt, consumed: false })
}

/// A plaintext polynomial in `R_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaintextPoly {
    coeffs: Vec<u64>,
}

impl PlaintextPoly {
    pub fn new(ctx: &RingContext, coeffs: Vec<u64>) -> Result<Self, BfvError> {
        if coeffs.len() != ctx.n() {
            return Err(BfvError::PlaintextLength { expected: ctx.n(), found: coeffs.len() });
        }
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, &c)| c >= ctx.t()) {
            return Err(BfvError::PlaintextOutOfRange { index, value, t: ctx.t() });
        }
        Ok(Self { coeffs })
    }

    pub fn zero(ctx: &RingContext) -> Self {
        Self { coeffs: vec![0; ctx.n()] }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }
}

/// Round and position of a ciphertext within an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CiphertextTag {
    pub round: u64,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    c0: Polynomial,
    c1: Polynomial,
    tag: CiphertextTag,
}

impl Ciphertext {
    /// Reassembles a ciphertext, e.g. after decoding from the wire.
    pub fn from_parts(c0: Polynomial, c1: Polynomial, tag: CiphertextTag) -> Result<Self, BfvError> {
        if c0.domain() != Domain::Coefficient {
            return Err(
                crate::error::RingError::DomainMismatch { expected: Domain::Coefficient, found: c0.domain() }.into()
            );
        }
        if c1.domain() != Domain::Ntt {
            return Err(crate::error::RingError::DomainMismatch { expected: Domain::Ntt, found: c1.domain() }.into());
        }
        Ok(Self { c0, c1, tag })
    }

    pub fn c0(&self) -> &Polynomial {
        &self.c0
    }

    pub fn c1(&self) -> &Polynomial {
        &self.c1
    }

    pub fn tag(&self) -> CiphertextTag {
        self.tag
    }
}

/// `c0 = b + Δ·m`, `c1 = NTT(−a)`; marks the mask consumed.
pub fn encrypt(
    ctx: &RingContext,
    m: &PlaintextPoly,
    mask: &mut EncryptionMask,
    tag: CiphertextTag,
) -> Result<Ciphertext, BfvError> {
    if mask.consumed {
        return Err(BfvError::MaskReused(u64::from_le_bytes(mask.id.0[..8].try_into().unwrap())));
    }
    if m.coeffs.len() != ctx.n() {
        return Err(BfvError::PlaintextLength { expected: ctx.n(), found: m.coeffs.len() });
    }
    if let Some((index, &value)) = m.coeffs.iter().enumerate().find(|(_, &c)| c >= ctx.t()) {
        return Err(BfvError::PlaintextOutOfRange { index, value, t: ctx.t() });
    }
    let mut c0 = ctx.scaled_plaintext(&m.coeffs);
    ctx.poly_add_assign(&mut c0, &mask.b)?;
    mask.consumed = true;
    Ok(Ciphertext { c0, c1: mask.neg_a_ntt.clone(), tag })
}

/// Homomorphic sum of ciphertexts sharing one tag.
pub fn add_ciphertexts(ctx: &RingContext, cts: &[Ciphertext]) -> Result<Ciphertext, BfvError> {
    let (first, rest) = cts.split_first().ok_or(BfvError::EmptySum)?;
    let mut acc = first.clone();
    for ct in rest {
        if ct.tag != acc.tag {
            return Err(BfvError::TagMismatch {
                expected_round: acc.tag.round,
                expected_index: acc.tag.index,
                round: ct.tag.round,
                index: ct.tag.index,
            });
        }
        ctx.poly_add_assign(&mut acc.c0, &ct.c0)?;
        ctx.poly_add_assign(&mut acc.c1, &ct.c1)?;
    }
    Ok(acc)
}

/// `c0 + c1·s` in the coefficient domain.
fn phase(ctx: &RingContext, ct: &Ciphertext, sk: &SecretKey) -> Result<Polynomial, BfvError> {
    let mut prod = ctx.poly_mul(&ct.c1, sk.s_ntt())?;
    ctx.ntt_inverse_in_place(&mut prod)?;
    ctx.poly_add_assign(&mut prod, &ct.c0)?;
    Ok(prod)
}

pub fn decrypt(ctx: &RingContext, ct: &Ciphertext, sk: &SecretKey) -> Result<PlaintextPoly, BfvError> {
    Ok(PlaintextPoly { coeffs: lift_and_scale(ctx, &phase(ctx, ct, sk)?)? })
}

/// Remaining noise budget in bits: `log2(Δ/2) − log2(max |c0 + c1·s − Δ·m|)`.
///
/// Noise is taken centered in `(−q/2, q/2]`; a zero-noise ciphertext is
/// scored as noise magnitude 1. Positive means decryption is exact.
pub fn noise_margin(
    ctx: &RingContext,
    ct: &Ciphertext,
    expected: &PlaintextPoly,
    sk: &SecretKey,
) -> Result<f64, BfvError> {
    let mut noise = phase(ctx, ct, sk)?;
    let scaled = ctx.scaled_plaintext(&expected.coeffs);
    noise = ctx.poly_sub(&noise, &scaled)?;
    let lifted = crt_reconstruct(ctx, &noise)?;
    let max = lifted.centered(ctx).into_iter().map(|(mag, _)| mag).max().unwrap_or_default();
    let max = if max.is_zero() { BigUint::from(1u8) } else { max };
    Ok(log2(&(ctx.delta() >> 1u32)) - log2(&max))
}

fn log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().log2() + shift as f64
}
