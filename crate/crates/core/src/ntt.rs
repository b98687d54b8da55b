//! Negacyclic NTT over a single limb.
//!
//! Forward is Cooley–Tukey with twiddles `ψ^brv(i)` in bit-reversed order,
//! taking natural-order coefficients to bit-reversed evaluations: output slot
//! `i` holds `p(ψ^(2·brv(i)+1))`. Inverse is Gentleman–Sande with the inverse
//! twiddles and a final scaling by `N⁻¹`.

use crate::modulus::Modulus;

#[derive(Debug, Clone)]
pub struct NttTable {
    modulus: Modulus,
    /// `ψ^brv(i)` for `i in 0..N`.
    forward: Vec<u64>,
    /// `ψ^(-brv(i))` for `i in 0..N`.
    inverse: Vec<u64>,
    forward_shoup: Vec<u64>,
    inverse_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

pub(crate) fn bit_reverse(mut x: usize, log_n: u32) -> usize {
    let mut r = 0;
    for _ in 0..log_n {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl NttTable {
    pub fn new(modulus: Modulus, n: usize) -> Self {
        let log_n = n.trailing_zeros();
        let psi = modulus.two_n_root();
        let psi_inv = modulus.inv(psi);
        let mut forward = vec![0; n];
        let mut inverse = vec![0; n];
        let (mut pw, mut pw_inv) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            forward[r] = pw;
            inverse[r] = pw_inv;
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let n_inv = modulus.inv(n as u64 % modulus.value());
        let forward_shoup = forward.iter().map(|&w| modulus.shoup(w)).collect();
        let inverse_shoup = inverse.iter().map(|&w| modulus.shoup(w)).collect();
        Self { modulus, forward, inverse, forward_shoup, inverse_shoup, n_inv, n_inv_shoup: modulus.shoup(n_inv) }
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn n_inv(&self) -> u64 {
        self.n_inv
    }

    pub fn forward(&self, a: &mut [u64]) {
        let n = a.len();
        debug_assert_eq!(n, self.forward.len());
        let m = &self.modulus;
        let mut t = n;
        let mut groups = 1;
        while groups < n {
            t >>= 1;
            for i in 0..groups {
                let (w, ws) = (self.forward[groups + i], self.forward_shoup[groups + i]);
                let start = 2 * i * t;
                for j in start..start + t {
                    let u = a[j];
                    let v = m.mul_shoup(a[j + t], w, ws);
                    a[j] = m.add(u, v);
                    a[j + t] = m.sub(u, v);
                }
            }
            groups <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        let n = a.len();
        debug_assert_eq!(n, self.inverse.len());
        let m = &self.modulus;
        let mut t = 1;
        let mut groups = n;
        while groups > 1 {
            let half = groups >> 1;
            let mut start = 0;
            for i in 0..half {
                let (w, ws) = (self.inverse[half + i], self.inverse_shoup[half + i]);
                for j in start..start + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = m.add(u, v);
                    a[j + t] = m.mul_shoup(m.sub(u, v), w, ws);
                }
                start += 2 * t;
            }
            t <<= 1;
            groups = half;
        }
        for x in a.iter_mut() {
            *x = m.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const P17: u64 = 65537;

    fn eval(m: &Modulus, p: &[u64], x: u64) -> u64 {
        p.iter().rev().fold(0, |acc, &c| m.add(m.mul(acc, x), c))
    }

    #[test]
    fn forward_matches_direct_evaluation_at_odd_root_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [4usize, 8, 16] {
            let m = Modulus::new(P17, n).unwrap();
            let table = NttTable::new(m, n);
            let psi = m.two_n_root();
            let log_n = n.trailing_zeros();
            for _ in 0..50 {
                let p: Vec<u64> = (0..n).map(|_| rng.gen_range(0..P17)).collect();
                let mut a = p.clone();
                table.forward(&mut a);
                for (i, &got) in a.iter().enumerate() {
                    let point = m.pow(psi, 2 * bit_reverse(i, log_n) as u64 + 1);
                    assert_eq!(got, eval(&m, &p, point));
                }
            }
        }
    }

    /// Gaussian elimination over Z_p on the Vandermonde system `V·c = y`.
    fn interpolate(m: &Modulus, points: &[u64], values: &[u64]) -> Vec<u64> {
        let n = points.len();
        let mut rows: Vec<Vec<u64>> = points
            .iter()
            .zip(values)
            .map(|(&x, &y)| {
                let mut row: Vec<u64> = (0..n as u64).map(|k| m.pow(x, k)).collect();
                row.push(y);
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| rows[r][col] != 0).unwrap();
            rows.swap(col, pivot);
            let inv = m.inv(rows[col][col]);
            for x in rows[col].iter_mut() {
                *x = m.mul(*x, inv);
            }
            for r in 0..n {
                if r != col && rows[r][col] != 0 {
                    let f = rows[r][col];
                    let pivot_row = rows[col].clone();
                    for (x, &y) in rows[r].iter_mut().zip(&pivot_row) {
                        *x = m.sub(*x, m.mul(f, y));
                    }
                }
            }
        }
        rows.iter().map(|r| r[n]).collect()
    }

    #[test]
    fn inverse_matches_vandermonde_interpolation() {
        let n = 8;
        let m = Modulus::new(P17, n).unwrap();
        let table = NttTable::new(m, n);
        let psi = m.two_n_root();
        let points: Vec<u64> = (0..n).map(|i| m.pow(psi, 2 * bit_reverse(i, 3) as u64 + 1)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let values: Vec<u64> = (0..n).map(|_| rng.gen_range(0..P17)).collect();
            let mut a = values.clone();
            table.inverse(&mut a);
            assert_eq!(a, interpolate(&m, &points, &values));
        }
    }

    #[test]
    fn constant_one_maps_to_all_ones() {
        let m = Modulus::new(P17, 16).unwrap();
        let table = NttTable::new(m, 16);
        let mut a = vec![0; 16];
        a[0] = 1;
        table.forward(&mut a);
        assert!(a.iter().all(|&x| x == 1));
        table.inverse(&mut a);
        assert_eq!(a[0], 1);
        assert!(a[1..].iter().all(|&x| x == 0));
    }
}
