//! Ring arithmetic, add-only BFV and bit-interleaved packing for encrypted
//! federated aggregation.
//!
//! The ring is `Z_q[X]/(X^N + 1)` with `q` a product of word-sized NTT primes
//! held in RNS form. Ciphertexts keep `c0` in the coefficient domain and `c1`
//! in the NTT domain so an aggregating server never transforms anything.
//! [`packing`] fits several quantized weights into each plaintext coefficient
//! so that summing ciphertexts sums every weight field independently.

pub mod bfv;
pub mod crt;
pub mod error;
pub mod modulus;
pub mod ntt;
pub mod packing;
pub mod ring;
pub mod sampling;
pub mod seed;

pub use bfv::{Ciphertext, EncryptionMask, PlaintextPoly, SecretKey};
pub use error::{BfvError, Bound, PackingError, RingError};
pub use modulus::Modulus;
pub use packing::{FieldLayout, PackedLayer, QuantParams};
pub use ring::{BigCoefficientVector, Domain, Polynomial, RingContext, SecurityCheck};
pub use seed::Seed;
