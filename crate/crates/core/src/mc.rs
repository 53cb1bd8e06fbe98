//! Seeded, order-stable Monte Carlo plumbing.
//!
//! Every sample `i` of a run draws from its own ChaCha stream `(seed, i)`, so
//! the draws do not depend on how samples are scheduled across threads.
//! Reductions go through [`pairwise_sum`] in index order, which makes every
//! estimator bit-identical for a given seed regardless of the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type SampleRng = ChaCha8Rng;

/// Independent random stream number `index` derived from `seed`.
pub fn stream(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a sub-seed so that different parts of one experiment never share streams.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finaliser mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `f(i, rng_i)` for `i in 0..samples` in parallel and returns results in index order.
pub fn par_samples<T, F>(seed: u64, samples: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SampleRng) -> T + Sync + Send,
{
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Pairwise (cascade) summation with a fixed split order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    /// Sample mean and standard error of the mean of i.i.d. values.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::new(0.0, 0.0);
        }
        let m = mean(xs);
        if n == 1 {
            return Self::new(m, 0.0);
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Self::new(m, (var / n as f64).sqrt())
    }

    /// `|value - target| <= k * stderr`, with a tiny absolute floor for exact zeros.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr + 1e-12
    }
}

/// Sample variance (n - 1 denominator) with the standard error of the variance estimator.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n < 2 {
        return Estimate::new(0.0, 0.0);
    }
    let m = mean(xs);
    let d2: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let d4: Vec<f64> = d2.iter().map(|v| v * v).collect();
    let nf = n as f64;
    let var = pairwise_sum(&d2) / (nf - 1.0);
    let m2 = pairwise_sum(&d2) / nf;
    let m4 = pairwise_sum(&d4) / nf;
    let se = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
    Estimate::new(var, se)
}

/// Standard normal draw by Box-Muller; kept local so sample streams have a fixed draw count.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 3).random()).collect();
        let mut r = stream(7, 3);
        let b: Vec<u64> = (0..4).map(|_| r.random()).collect();
        assert_eq!(a[0], b[0]);
        let mut r2 = stream(7, 4);
        assert_ne!(b[0], r2.random::<u64>());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn par_samples_is_order_stable() {
        let a = par_samples(11, 257, |i, rng| (i, rng.random::<u32>()));
        let b = par_samples(11, 257, |i, rng| (i, rng.random::<u32>()));
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(k, (i, _))| k == *i));
    }

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(1, "base"), derive_seed(1, "fiber"));
        assert_eq!(derive_seed(1, "base"), derive_seed(1, "base"));
    }
}
