//! RNS representation of `Z_q[X]/(X^N + 1)`.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::RingError;
use crate::modulus::{ntt_primes_above, Modulus};
use crate::ntt::NttTable;

/// Degree of the default ring.
pub const DEFAULT_DEGREE: usize = 4096;
/// Default plaintext modulus, `17·2^27 + 1`.
pub const DEFAULT_PLAINTEXT_MODULUS: u64 = 2_281_701_377;
/// Default number of RNS limbs.
pub const DEFAULT_LIMBS: usize = 2;
/// Default limbs are the smallest NTT-friendly primes above `2^54`.
pub const DEFAULT_LIMB_BITS: u32 = 54;

/// Maximum `log2 q` for 128-bit classical security with a small secret
/// (HomomorphicEncryption.org standard, Table 1).
pub fn security_budget_128(n: usize) -> Option<u32> {
    match n {
        1024 => Some(27),
        2048 => Some(54),
        4096 => Some(109),
        8192 => Some(218),
        16384 => Some(438),
        32768 => Some(881),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecurityCheck {
    /// Reject `q` beyond the 128-bit budget for `N` (and any `N` without a budget).
    Enforce128,
    /// Toy parameters for tests and oracles.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// Immutable parameters and precomputation for one ring.
#[derive(Debug)]
pub struct RingContext {
    n: usize,
    limbs: Vec<Modulus>,
    tables: Vec<NttTable>,
    q: BigUint,
    /// `q` as little-endian 64-bit words, for rejection sampling.
    q_words: Vec<u64>,
    half_q: BigUint,
    t: u64,
    delta: BigUint,
    delta_residues: Vec<u64>,
    /// `q / p_i`.
    crt_cofactors: Vec<BigUint>,
    /// `(q / p_i)^-1 mod p_i`.
    crt_cofactor_invs: Vec<u64>,
    wide: Option<WideLift>,
}

/// Fixed-width CRT data for rings with at most two limbs and `q < 2^126`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WideLift {
    pub q: u128,
    pub half_q: u128,
    /// `p_0^-1 mod p_1`; unused with one limb.
    pub p0_inv: u64,
}

impl RingContext {
    pub fn new(n: usize, moduli: &[u64], t: u64, check: SecurityCheck) -> Result<Self, RingError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(RingError::InvalidDegree(n));
        }
        if moduli.is_empty() {
            return Err(RingError::NoLimbs);
        }
        if t < 2 {
            return Err(RingError::InvalidPlaintextModulus(t));
        }
        for (i, a) in moduli.iter().enumerate() {
            if moduli[..i].contains(a) {
                return Err(RingError::DuplicateLimbs);
            }
        }
        let limbs = moduli.iter().map(|&p| Modulus::new(p, n)).collect::<Result<Vec<_>, _>>()?;

        let q: BigUint = moduli.iter().map(|&p| BigUint::from(p)).product();
        let log2_q = log2_big(&q);
        if check == SecurityCheck::Enforce128 {
            let budget = security_budget_128(n).unwrap_or(0);
            if log2_q > budget as f64 {
                return Err(RingError::InsecureParameters { n, log2_q, budget });
            }
        }

        let tables = limbs.iter().map(|&m| NttTable::new(m, n)).collect();
        let delta = &q / t;
        let delta_residues = limbs.iter().map(|m| reduce_big(&delta, m)).collect();
        let crt_cofactors: Vec<BigUint> = moduli.iter().map(|&p| &q / p).collect();
        let crt_cofactor_invs = limbs.iter().zip(&crt_cofactors).map(|(m, c)| m.inv(reduce_big(c, m))).collect();
        let half_q = &q >> 1u32;
        let q_words = q.to_u64_digits();
        let wide = (limbs.len() <= 2 && q.bits() <= 126).then(|| WideLift {
            q: q.to_u128().expect("at most 126 bits"),
            half_q: half_q.to_u128().expect("at most 125 bits"),
            p0_inv: if limbs.len() == 2 { limbs[1].inv(limbs[1].reduce(limbs[0].value())) } else { 0 },
        });

        Ok(Self {
            n,
            limbs,
            tables,
            q,
            q_words,
            half_q,
            t,
            delta,
            delta_residues,
            crt_cofactors,
            crt_cofactor_invs,
            wide,
        })
    }

    /// `N = n` with `limb_count` default 54-bit limbs, 128-bit security enforced.
    pub fn with_default_limbs(n: usize, limb_count: usize, t: u64) -> Result<Self, RingError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(RingError::InvalidDegree(n));
        }
        let moduli = ntt_primes_above(DEFAULT_LIMB_BITS, n, limb_count);
        Self::new(n, &moduli, t, SecurityCheck::Enforce128)
    }

    /// `N = 4096`, two 54-bit limbs, `t = 2281701377`.
    pub fn default_params() -> Self {
        Self::with_default_limbs(DEFAULT_DEGREE, DEFAULT_LIMBS, DEFAULT_PLAINTEXT_MODULUS)
            .expect("default parameters are valid")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn limbs(&self) -> &[Modulus] {
        &self.limbs
    }

    #[inline]
    pub fn limb_count(&self) -> usize {
        self.limbs.len()
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub(crate) fn q_words(&self) -> &[u64] {
        &self.q_words
    }

    pub fn log2_q(&self) -> f64 {
        log2_big(&self.q)
    }

    #[inline]
    pub fn t(&self) -> u64 {
        self.t
    }

    /// `Δ = ⌊q/t⌋`.
    pub fn delta(&self) -> &BigUint {
        &self.delta
    }

    pub(crate) fn half_q(&self) -> &BigUint {
        &self.half_q
    }

    pub(crate) fn wide(&self) -> Option<WideLift> {
        self.wide
    }

    pub(crate) fn crt_terms(&self) -> impl Iterator<Item = (&Modulus, &BigUint, u64)> {
        self.limbs.iter().zip(&self.crt_cofactors).zip(&self.crt_cofactor_invs).map(|((m, c), &inv)| (m, c, inv))
    }

    pub fn ntt_table(&self, limb: usize) -> &NttTable {
        &self.tables[limb]
    }

    /// Number of residues in one polynomial.
    #[inline]
    pub fn poly_len(&self) -> usize {
        self.n * self.limbs.len()
    }

    fn check_shape(&self, p: &Polynomial) -> Result<(), RingError> {
        if p.n != self.n || p.residues.len() != self.poly_len() {
            return Err(RingError::ShapeMismatch { expected: self.poly_len(), found: p.residues.len() });
        }
        Ok(())
    }

    fn check(&self, p: &Polynomial, domain: Domain) -> Result<(), RingError> {
        self.check_shape(p)?;
        expect_domain(p, domain)
    }

    pub fn ntt_forward(&self, p: &Polynomial) -> Result<Polynomial, RingError> {
        let mut out = p.clone();
        self.ntt_forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn ntt_forward_in_place(&self, p: &mut Polynomial) -> Result<(), RingError> {
        self.check(p, Domain::Coefficient)?;
        for (limb, table) in p.residues.chunks_exact_mut(self.n).zip(&self.tables) {
            table.forward(limb);
        }
        p.domain = Domain::Ntt;
        Ok(())
    }

    pub fn ntt_inverse(&self, p: &Polynomial) -> Result<Polynomial, RingError> {
        let mut out = p.clone();
        self.ntt_inverse_in_place(&mut out)?;
        Ok(out)
    }

    pub fn ntt_inverse_in_place(&self, p: &mut Polynomial) -> Result<(), RingError> {
        self.check(p, Domain::Ntt)?;
        for (limb, table) in p.residues.chunks_exact_mut(self.n).zip(&self.tables) {
            table.inverse(limb);
        }
        p.domain = Domain::Coefficient;
        Ok(())
    }

    pub fn poly_add(&self, a: &Polynomial, b: &Polynomial) -> Result<Polynomial, RingError> {
        let mut out = a.clone();
        self.poly_add_assign(&mut out, b)?;
        Ok(out)
    }

    pub fn poly_add_assign(&self, acc: &mut Polynomial, b: &Polynomial) -> Result<(), RingError> {
        self.check_shape(acc)?;
        self.check(b, acc.domain)?;
        self.zip_limbs(acc, b, |m, x, y| m.add(x, y));
        Ok(())
    }

    pub fn poly_sub(&self, a: &Polynomial, b: &Polynomial) -> Result<Polynomial, RingError> {
        self.check_shape(a)?;
        self.check(b, a.domain)?;
        let mut out = a.clone();
        self.zip_limbs(&mut out, b, |m, x, y| m.sub(x, y));
        Ok(out)
    }

    pub fn poly_neg(&self, p: &Polynomial) -> Result<Polynomial, RingError> {
        self.check_shape(p)?;
        let mut out = p.clone();
        for (limb, m) in out.residues.chunks_exact_mut(self.n).zip(&self.limbs) {
            for x in limb {
                *x = m.neg(*x);
            }
        }
        Ok(out)
    }

    /// Pointwise product of two NTT-domain polynomials (negacyclic convolution).
    pub fn poly_mul(&self, a: &Polynomial, b: &Polynomial) -> Result<Polynomial, RingError> {
        self.check(a, Domain::Ntt)?;
        self.check(b, Domain::Ntt)?;
        let mut out = a.clone();
        self.zip_limbs(&mut out, b, |m, x, y| m.mul(x, y));
        Ok(out)
    }

    pub fn poly_scalar_mul(&self, p: &Polynomial, k: &BigUint) -> Result<Polynomial, RingError> {
        self.check_shape(p)?;
        let mut out = p.clone();
        for (limb, m) in out.residues.chunks_exact_mut(self.n).zip(&self.limbs) {
            let k = reduce_big(k, m);
            for x in limb {
                *x = m.mul(*x, k);
            }
        }
        Ok(out)
    }

    /// `Δ·m` for plaintext coefficients already validated below `t`.
    pub(crate) fn scaled_plaintext(&self, coeffs: &[u64]) -> Polynomial {
        let mut out = Polynomial::zero(self, Domain::Coefficient);
        for ((limb, m), &d) in out.residues.chunks_exact_mut(self.n).zip(&self.limbs).zip(&self.delta_residues) {
            for (x, &c) in limb.iter_mut().zip(coeffs) {
                *x = m.mul(m.reduce(c), d);
            }
        }
        out
    }

    fn zip_limbs(&self, acc: &mut Polynomial, b: &Polynomial, f: impl Fn(&Modulus, u64, u64) -> u64) {
        for ((la, lb), m) in acc.residues.chunks_exact_mut(self.n).zip(b.residues.chunks_exact(self.n)).zip(&self.limbs)
        {
            for (x, &y) in la.iter_mut().zip(lb) {
                *x = f(m, *x, y);
            }
        }
    }
}

fn expect_domain(p: &Polynomial, domain: Domain) -> Result<(), RingError> {
    if p.domain != domain {
        return Err(RingError::DomainMismatch { expected: domain, found: p.domain });
    }
    Ok(())
}

pub(crate) fn reduce_big(x: &BigUint, m: &Modulus) -> u64 {
    (x % m.value()).to_u64().expect("remainder fits a word")
}

fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_f64().unwrap_or(0.0).log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().log2() + shift as f64
}

/// An element of `R_q` as `limbs × N` residues (limb-major), tagged with its domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    domain: Domain,
    n: usize,
    residues: Vec<u64>,
}

impl Polynomial {
    pub fn zero(ctx: &RingContext, domain: Domain) -> Self {
        Self { domain, n: ctx.n, residues: vec![0; ctx.poly_len()] }
    }

    /// Constant `1` in the coefficient domain.
    pub fn one(ctx: &RingContext) -> Self {
        Self::monomial(ctx, 0)
    }

    /// `X^k` in the coefficient domain, `k < N`.
    pub fn monomial(ctx: &RingContext, k: usize) -> Self {
        assert!(k < ctx.n, "monomial degree {k} out of range");
        let mut p = Self::zero(ctx, Domain::Coefficient);
        for limb in p.residues.chunks_exact_mut(ctx.n) {
            limb[k] = 1;
        }
        p
    }

    /// Builds a polynomial from limb-major residues, validating every residue.
    pub fn from_residues(ctx: &RingContext, domain: Domain, residues: Vec<u64>) -> Result<Self, RingError> {
        if residues.len() != ctx.poly_len() {
            return Err(RingError::ShapeMismatch { expected: ctx.poly_len(), found: residues.len() });
        }
        for (limb, m) in residues.chunks_exact(ctx.n).zip(ctx.limbs()) {
            if let Some(&bad) = limb.iter().find(|&&x| x >= m.value()) {
                return Err(RingError::InvalidModulus { value: bad, reason: "residue not below its limb modulus" });
            }
        }
        Ok(Self { domain, n: ctx.n, residues })
    }

    /// Coefficient-domain polynomial with small signed coefficients, negatives as `q − |v|`.
    pub fn from_signed(ctx: &RingContext, coeffs: &[i64]) -> Self {
        assert_eq!(coeffs.len(), ctx.n);
        let mut p = Self::zero(ctx, Domain::Coefficient);
        for (limb, m) in p.residues.chunks_exact_mut(ctx.n).zip(ctx.limbs()) {
            for (x, &c) in limb.iter_mut().zip(coeffs) {
                let mag = m.reduce(c.unsigned_abs());
                *x = if c < 0 { m.neg(mag) } else { mag };
            }
        }
        p
    }

    /// Coefficient-domain polynomial from arbitrary-precision coefficients, each reduced mod `q`.
    pub fn from_big(ctx: &RingContext, coeffs: &[BigUint]) -> Self {
        assert_eq!(coeffs.len(), ctx.n);
        let mut p = Self::zero(ctx, Domain::Coefficient);
        for (limb, m) in p.residues.chunks_exact_mut(ctx.n).zip(ctx.limbs()) {
            for (x, c) in limb.iter_mut().zip(coeffs) {
                *x = reduce_big(c, m);
            }
        }
        p
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn limb(&self, i: usize) -> &[u64] {
        &self.residues[i * self.n..(i + 1) * self.n]
    }

    pub fn is_zero(&self) -> bool {
        self.residues.iter().all(|&x| x == 0)
    }

    pub(crate) fn residues_mut(&mut self) -> &mut [u64] {
        &mut self.residues
    }
}

/// Coefficients of a coefficient-domain polynomial lifted to `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigCoefficientVector(pub Vec<BigUint>);

impl BigCoefficientVector {
    pub fn coeffs(&self) -> &[BigUint] {
        &self.0
    }

    /// Centered lift into `(−q/2, q/2]`, as (magnitude, negative).
    pub fn centered(&self, ctx: &RingContext) -> Vec<(BigUint, bool)> {
        self.0.iter().map(|c| if c > ctx.half_q() { (ctx.q() - c, true) } else { (c.clone(), false) }).collect()
    }
}
