use rand::seq::index::sample;

use bitfold_core::Seed;

use crate::error::ProtocolError;

const STREAM_SELECT: u64 = 0x73656c;

/// Uniform sample of `sample` distinct ids from `0..total`, sorted, fixed by `(seed, round)`.
pub fn select_clients(total: usize, sample_size: usize, seed: &Seed, round: u64) -> Result<Vec<u64>, ProtocolError> {
    if sample_size > total {
        return Err(ProtocolError::InvalidSelection { total, sample: sample_size });
    }
    let mut rng = seed.derive(STREAM_SELECT, round).rng();
    let mut ids: Vec<u64> = sample(&mut rng, total, sample_size).into_iter().map(|i| i as u64).collect();
    ids.sort_unstable();
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_and_reproducible() {
        let s = Seed::from_u64(1);
        assert_eq!(select_clients(10, 10, &s, 3).unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(select_clients(10, 5, &s, 3).unwrap(), select_clients(10, 5, &s, 3).unwrap());
        assert!(select_clients(4, 5, &s, 0).is_err());
        assert!(select_clients(0, 0, &s, 0).unwrap().is_empty());
    }

    #[test]
    fn frequencies_are_binomial() {
        let (u, m, rounds) = (10usize, 5usize, 10_000u64);
        let s = Seed::from_u64(2);
        let mut counts = vec![0u64; u];
        for r in 0..rounds {
            let ids = select_clients(u, m, &s, r).unwrap();
            assert_eq!(ids.len(), m);
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
            for id in ids {
                counts[id as usize] += 1;
            }
        }
        let p = m as f64 / u as f64;
        let mean = rounds as f64 * p;
        let sigma = (rounds as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma, "count {c}");
        }
    }
}
