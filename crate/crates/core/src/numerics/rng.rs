//! Seeded, forkable random streams.
//!
//! A `RngStream` is fully determined by `(seed, stream)`; the same pair always
//! yields the same sample sequence, which is what makes Monte-Carlo trials
//! reproducible and safe to distribute across workers.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Counter-based RNG stream keyed by `(seed, stream)`.
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derive an independent child stream. Children with distinct labels do
    /// not overlap with each other or with the parent.
    pub fn fork(&self, label: u64) -> Self {
        let child = splitmix64(self.stream ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Self::new(self.seed, child)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.uniform() * n as f64) as usize % n
    }

    /// `k` distinct indices out of `[0, n)` via partial Fisher-Yates.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// Standard normal pair (Box-Muller).
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// One sample of CN(0, variance).
    pub fn complex_normal(&mut self, variance: f64) -> Complex64 {
        let (re, im) = self.standard_normal_pair();
        let s = (variance / 2.0).sqrt();
        Complex64::new(re * s, im * s)
    }

    /// `n` i.i.d. CN(0, variance) samples; real and imaginary parts are each
    /// N(0, variance/2).
    pub fn complex_gaussian(&mut self, n: usize, variance: f64) -> Vec<Complex64> {
        assert!(variance >= 0.0);
        (0..n).map(|_| self.complex_normal(variance)).collect()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_give_identical_sequences() {
        let mut a = RngStream::new(42, 3);
        let mut b = RngStream::new(42, 3);
        let xa = a.complex_gaussian(64, 1.0);
        let xb = b.complex_gaussian(64, 1.0);
        assert_eq!(xa, xb);
    }

    #[test]
    fn different_streams_differ() {
        let mut a = RngStream::new(42, 3);
        let mut b = RngStream::new(42, 4);
        assert_ne!(a.complex_gaussian(8, 1.0), b.complex_gaussian(8, 1.0));
    }

    #[test]
    fn zero_variance_is_all_zero() {
        let mut rng = RngStream::new(1, 0);
        assert!(rng
            .complex_gaussian(16, 0.0)
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn sample_statistics_match_variance() {
        let mut rng = RngStream::new(123, 7);
        let n = 100_000;
        let x = rng.complex_gaussian(n, 1.0);
        let mean: Complex64 = x.iter().sum::<Complex64>() / n as f64;
        let var: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!(mean.norm() < 0.02, "sample mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
    }

    #[test]
    fn forked_streams_are_reproducible_and_distinct() {
        let root = RngStream::new(9, 100);
        let mut c1 = root.fork(1);
        let mut c1_again = RngStream::new(9, 100).fork(1);
        let mut c2 = root.fork(2);
        let a = c1.complex_gaussian(8, 1.0);
        assert_eq!(a, c1_again.complex_gaussian(8, 1.0));
        assert_ne!(a, c2.complex_gaussian(8, 1.0));
    }

    #[test]
    fn choose_distinct_yields_unique_indices() {
        let mut rng = RngStream::new(5, 5);
        for _ in 0..100 {
            let mut picked = rng.choose_distinct(10, 6);
            picked.sort_unstable();
            picked.dedup();
            assert_eq!(picked.len(), 6);
            assert!(picked.iter().all(|&i| i < 10));
        }
    }
}
