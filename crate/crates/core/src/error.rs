use num_bigint::BigUint;
use thiserror::Error;

use crate::ring::Domain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error("ring degree {0} is not a power of two >= 2")]
    InvalidDegree(usize),
    #[error("modulus {value} rejected: {reason}")]
    InvalidModulus { value: u64, reason: &'static str },
    #[error("limb moduli must be pairwise distinct")]
    DuplicateLimbs,
    #[error("at least one limb modulus is required")]
    NoLimbs,
    #[error("plaintext modulus must be at least 2, got {0}")]
    InvalidPlaintextModulus(u64),
    #[error("log2(q) = {log2_q:.2} exceeds the {budget}-bit budget for N = {n} at 128-bit security")]
    InsecureParameters { n: usize, log2_q: f64, budget: u32 },
    #[error("expected a polynomial in the {expected:?} domain, found {found:?}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("polynomial shape {found} does not match the ring context ({expected} residues)")]
    ShapeMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BfvError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("encryption mask {0} was already consumed")]
    MaskReused(u64),
    #[error("plaintext coefficient {index} = {value} is not below t = {t}")]
    PlaintextOutOfRange { index: usize, value: u64, t: u64 },
    #[error("plaintext has {found} coefficients, ring degree is {expected}")]
    PlaintextLength { expected: usize, found: usize },
    #[error("cannot add an empty list of ciphertexts")]
    EmptySum,
    #[error("ciphertext tag mismatch: expected round {expected_round} index {expected_index}, got round {round} index {index}")]
    TagMismatch { expected_round: u64, expected_index: u64, round: u64, index: u64 },
}

/// Which feasibility bound a packing layout breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// `U·(2^β − 1) < 2^(β+δ)`: fields must not carry into their neighbour.
    CarryIsolation,
    /// `U·M < t`: the largest aggregated coefficient must stay below `t`.
    PlaintextModulus,
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bound::CarryIsolation => "carry-isolation bound U(2^β − 1) < 2^(β+δ)",
            Bound::PlaintextModulus => "plaintext-modulus bound U·M < t",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PackingError {
    #[error("layout violates the {bound}: {lhs} >= {rhs}")]
    Infeasible { bound: Bound, lhs: BigUint, rhs: BigUint },
    #[error("invalid layout parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("weight {index} = {value} does not fit in {beta} bits")]
    WeightOutOfRange { index: usize, value: u64, beta: u32 },
    #[error("packed coefficient {index} = {value} is not below t = {t}")]
    CoefficientOutOfRange { index: usize, value: u64, t: u64 },
    #[error("expected {expected} weights but the packed layer holds at most {capacity}")]
    CountMismatch { expected: usize, capacity: usize },
    #[error("cannot average over zero participants")]
    ZeroParticipants,
}
