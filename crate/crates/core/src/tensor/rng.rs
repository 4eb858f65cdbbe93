use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Seedable, counter-based random stream (ChaCha8).
///
/// Independent sub-streams are derived with [`Rng::stream`], so consumers
/// that draw different amounts of randomness never perturb each other.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A fresh generator on stream `id` of the same seed.
    pub fn stream(&self, id: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(id);
        Rng {
            seed: self.seed,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask(rng: &mut Rng, rate: f64, rows: usize, cols: usize) -> Result<DenseMatrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    if rate == 0.0 {
        return Ok(DenseMatrix::filled(rows, cols, 1.0));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    DenseMatrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_eq!(a.normal().to_bits(), b.normal().to_bits());
    }

    #[test]
    fn streams_differ() {
        let base = Rng::new(7);
        let mut s0 = base.stream(0);
        let mut s1 = base.stream(1);
        assert_ne!(s0.next_u64(), s1.next_u64());
        assert_eq!(base.stream(3).next_u64(), Rng::new(7).stream(3).next_u64());
    }

    #[test]
    fn zero_rate_is_all_ones() {
        let m = dropout_mask(&mut Rng::new(1), 0.0, 3, 4).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn empirical_drop_fraction() {
        let m = dropout_mask(&mut Rng::new(2024), 0.3, 100, 1000).unwrap();
        let zeros = m.data().iter().filter(|&&v| v == 0.0).count();
        let frac = zeros as f64 / m.data().len() as f64;
        assert!((frac - 0.3).abs() <= 0.01, "zero fraction {frac}");
        let keep = 1.0 / 0.7;
        assert!(m.data().iter().all(|&v| v == 0.0 || v == keep));
    }

    #[test]
    fn masks_are_reproducible() {
        let a = dropout_mask(&mut Rng::new(9), 0.5, 8, 8).unwrap();
        let b = dropout_mask(&mut Rng::new(9), 0.5, 8, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rate_out_of_range() {
        assert!(dropout_mask(&mut Rng::new(0), 1.0, 1, 1).is_err());
        assert!(dropout_mask(&mut Rng::new(0), -0.1, 1, 1).is_err());
    }
}
