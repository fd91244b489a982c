use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::Matrix;
use crate::error::{Error, Result};

/// Seeded pseudorandom source.
///
/// The bit stream is ChaCha8 keyed from the 64-bit seed, so it is identical
/// on every platform. Normal deviates come from the Box–Muller transform:
/// two uniforms `u1 in (0, 1]`, `u2 in [0, 1)` give
/// `sqrt(-2 ln u1) * (cos 2πu2, sin 2πu2)`; both values are used in turn.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Independent stream derived from the same seed. Different `stream`
    /// values never overlap.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            seed,
            inner,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` without modulo bias. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Standard normal deviate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Matrix of i.i.d. `N(0, sigma^2)` entries, filled row by row.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize, sigma: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| sigma * self.normal())
    }

    /// Matrix of i.i.d. `U(-bound, bound)` entries, filled row by row.
    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, bound: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.uniform_range(-bound, bound))
    }
}

/// I.i.d. normal matrix with standard deviation `sigma`.
pub fn sample_gaussian(rng: &mut Rng, rows: usize, cols: usize, sigma: f64) -> Result<Matrix> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    Ok(rng.gaussian_matrix(rows, cols, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zeros() {
        let m = sample_gaussian(&mut Rng::new(1), 4, 6, 0.0).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(sample_gaussian(&mut Rng::new(1), 2, 2, -1.0).is_err());
    }

    #[test]
    fn large_sample_moments() {
        let m = sample_gaussian(&mut Rng::new(42), 1000, 1000, 1.0).unwrap();
        let n = m.data().len() as f64;
        let mean = m.sum() / n;
        let var = m.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.01, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() <= 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn same_seed_same_bits() {
        let a = sample_gaussian(&mut Rng::new(7), 30, 20, 1.5).unwrap();
        let b = sample_gaussian(&mut Rng::new(7), 30, 20, 1.5).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn streams_differ() {
        let a = Rng::with_stream(5, 0).next_u64();
        let b = Rng::with_stream(5, 1).next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = Rng::new(0);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[rng.below(7)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
