//! Seeded random streams shared by simulation and learning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one uniform and inverts the cumulative distribution of `row`.
pub fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    invert(row, u)
}

pub(crate) fn invert(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u above the total mass
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_skips_zero_mass() {
        assert_eq!(invert(&[0.0, 0.5, 0.0, 0.5], 0.0), 1);
        assert_eq!(invert(&[0.0, 0.5, 0.0, 0.5], 0.7), 3);
        assert_eq!(invert(&[0.3, 0.7, 0.0], 0.9999999999999999), 1);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..4).map(|_| stream_rng(7, 3).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r0 = stream_rng(7, 0);
        let mut r1 = stream_rng(7, 1);
        assert_ne!(r0.random::<u64>(), r1.random::<u64>());
    }
}
