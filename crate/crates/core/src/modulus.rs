//! Word-sized prime moduli with Barrett reduction and negacyclic NTT roots.

use crate::error::RingError;

/// Largest supported limb width. Keeps the Barrett intermediate inside `u128`.
pub const MAX_MODULUS_BITS: u32 = 62;

/// A word-sized RNS limb modulus `p ≡ 1 (mod 2N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    bits: u32,
    /// `floor(2^(2·bits) / value)`, below `2^(bits+1)`.
    barrett_ratio: u64,
    two_n_root: u64,
}

impl Modulus {
    /// Builds a limb for ring degree `n`, validating primality and `value ≡ 1 (mod 2n)`.
    ///
    /// The stored root is the smallest primitive `2n`-th root of unity found by
    /// raising `2, 3, 4, …` to `(value − 1)/2n`.
    pub fn new(value: u64, n: usize) -> Result<Self, RingError> {
        if !n.is_power_of_two() || n < 2 {
            return Err(RingError::InvalidDegree(n));
        }
        let bits = 64 - value.leading_zeros();
        if value < 3 || bits > MAX_MODULUS_BITS || !is_prime(value) {
            return Err(RingError::InvalidModulus { value, reason: "not a prime below 2^62" });
        }
        let two_n = 2 * n as u64;
        if !(value - 1).is_multiple_of(two_n) {
            return Err(RingError::InvalidModulus { value, reason: "not congruent to 1 mod 2N" });
        }
        let barrett_ratio = ((1u128 << (2 * bits)) / value as u128) as u64;
        let mut m = Self { value, bits, barrett_ratio, two_n_root: 0 };
        let cofactor = (value - 1) / two_n;
        let minus_one = value - 1;
        for x in 2..value {
            let g = m.pow(x, cofactor);
            // g has order dividing 2n; it is exactly 2n iff g^n = -1.
            if m.pow(g, n as u64) == minus_one {
                m.two_n_root = g;
                return Ok(m);
            }
        }
        unreachable!("a prime p ≡ 1 mod 2n always has a primitive 2n-th root")
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Primitive `2N`-th root of unity.
    #[inline]
    pub fn two_n_root(&self) -> u64 {
        self.two_n_root
    }

    /// Barrett reduction of `x < value²`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        debug_assert!(x < (self.value as u128) * (self.value as u128));
        let top = (x >> (self.bits - 1)) as u64;
        let q = ((top as u128 * self.barrett_ratio as u128) >> (self.bits + 1)) as u64;
        // The estimate is short by at most two, so the true remainder fits a word.
        let mut r = (x as u64).wrapping_sub(q.wrapping_mul(self.value));
        while r >= self.value {
            r -= self.value;
        }
        r
    }

    /// Reduces an arbitrary word.
    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.value
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.value && b < self.value);
        self.reduce_u128(a as u128 * b as u128)
    }

    /// `floor(w·2^64 / value)`, the precomputed companion for [`Modulus::mul_shoup`].
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a·w mod value` for a fixed `w < value` with companion `w_shoup`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut base = self.reduce(base);
        let mut acc = 1 % self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse by Fermat's little theorem. `a` must be nonzero mod `value`.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(self.reduce(a) != 0);
        self.pow(a, self.value - 2)
    }
}

/// Reference `(a·b) mod m` through a full 128-bit remainder.
#[inline]
pub fn mul_mod_wide(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_wide(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_wide(acc, base, m);
        }
        base = mul_mod_wide(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod_wide(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_wide(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` smallest primes strictly above `2^bits` that are `≡ 1 (mod 2n)`.
pub fn ntt_primes_above(bits: u32, n: usize, count: usize) -> Vec<u64> {
    let two_n = 2 * n as u64;
    let floor = 1u64 << bits;
    // first candidate > 2^bits with candidate ≡ 1 mod 2n
    let mut candidate = (floor / two_n) * two_n + 1;
    if candidate <= floor {
        candidate += two_n;
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if is_prime(candidate) {
            out.push(candidate);
        }
        candidate += two_n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P17: u64 = 65537;

    #[test]
    fn mul_edge_cases() {
        let m = Modulus::new(P17, 8).unwrap();
        for x in [0, 1, 2, 12345, P17 - 1] {
            assert_eq!(m.mul(0, x), 0);
            assert_eq!(m.mul(1, x), x);
        }
        assert_eq!(m.mul(P17 - 1, P17 - 1), 1);

        let big = ntt_primes_above(54, 4096, 1)[0];
        let m = Modulus::new(big, 4096).unwrap();
        assert_eq!(m.mul(big - 1, big - 1), 1);
        assert_eq!(m.mul(1, big - 1), big - 1);
    }

    #[test]
    fn root_has_exact_order() {
        for (p, n) in [(P17, 4usize), (P17, 8), (P17, 16), (12289, 1024)] {
            let m = Modulus::new(p, n).unwrap();
            let g = m.two_n_root();
            assert_eq!(m.pow(g, 2 * n as u64), 1);
            assert_eq!(m.pow(g, n as u64), p - 1);
        }
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(Modulus::new(65539, 8).is_err()); // prime but ≢ 1 mod 16
        assert!(Modulus::new(65535, 8).is_err());
        assert!(Modulus::new(P17, 12).is_err());
        assert!(Modulus::new((1 << 62) + 1, 2).is_err());
    }

    #[test]
    fn default_primes_are_54_bit_and_distinct() {
        let ps = ntt_primes_above(54, 4096, 2);
        assert!(ps[0] > 1 << 54 && ps[1] > ps[0]);
        for p in &ps {
            assert_eq!(p % 8192, 1);
            assert!(is_prime(*p));
        }
        // nothing smaller qualifies; 2^54 ≡ 0 mod 8192 so this walks the residue class
        let mut c = (1u64 << 54) + 1;
        while c < ps[0] {
            assert!(!is_prime(c));
            c += 8192;
        }
    }

    #[test]
    fn miller_rabin_small_range() {
        let sieve: Vec<bool> =
            (0..2000u64).map(|n| n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)).collect();
        for (n, &p) in sieve.iter().enumerate() {
            assert_eq!(is_prime(n as u64), p, "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn barrett_matches_wide_remainder(a in any::<u64>(), b in any::<u64>(), which in 0usize..3) {
            let p = [P17, ntt_primes_above(54, 4096, 1)[0], ntt_primes_above(61, 2, 1)[0]][which];
            let m = Modulus::new(p, 2).unwrap();
            let (a, b) = (a % p, b % p);
            prop_assert_eq!(m.mul(a, b), mul_mod_wide(a, b, p));
            prop_assert_eq!(m.add(a, b), ((a as u128 + b as u128) % p as u128) as u64);
            prop_assert_eq!(m.add(m.sub(a, b), b), a);
            prop_assert_eq!(m.mul_shoup(a, b, m.shoup(b)), mul_mod_wide(a, b, p));
            prop_assert_eq!(m.mul(p - 1, p - 1), 1);
        }
    }
}
