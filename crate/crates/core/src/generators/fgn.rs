//! Fractional Gaussian noise and fractional Brownian motion prices.
//!
//! Noise is drawn with circulant embedding: the autocovariance is embedded
//! in a circulant matrix of size `2m` (`m` the next power of two `>= n`),
//! whose eigenvalues come from one FFT. A complex normal vector scaled by
//! the square-root spectrum and transformed back has real part distributed
//! exactly as the stationary noise. If the embedding is not positive
//! semi-definite the generator falls back to a dense Cholesky factor.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{check_common, exp_path};
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::series::PriceSeries;

/// Eigenvalues below this are treated as a failed embedding.
pub const NEGATIVE_EIGEN_TOL: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmParams {
    pub hurst: f64,
    pub mu: f64,
    pub sigma: f64,
    pub s0: f64,
    pub len: usize,
}

impl FbmParams {
    pub fn validate(&self) -> Result<()> {
        check_common(self.s0, self.len)?;
        check_hurst(self.hurst)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite() && self.mu.is_finite()) {
            return Err(Error::Validation(format!(
                "FBM needs finite mu and sigma >= 0, got mu={} sigma={}",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "Hurst exponent {h} outside (0, 1]"
        )))
    }
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let two_h = 2.0 * h;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgnMethod {
    /// Circulant embedding, dense fallback on a non-PSD embedding.
    Auto,
    /// Always use the dense Cholesky factor (O(n³), small `n` only).
    Dense,
}

/// `n` points of zero-mean, unit-variance fractional Gaussian noise.
pub fn gen_fgn(h: f64, n: usize, seed: Seed) -> Result<Vec<f64>> {
    gen_fgn_with(h, n, seed, FgnMethod::Auto)
}

pub fn gen_fgn_with(h: f64, n: usize, seed: Seed, method: FgnMethod) -> Result<Vec<f64>> {
    check_hurst(h)?;
    if n == 0 {
        return Err(Error::Validation("fGn length must be >= 1".into()));
    }
    let mut rng = seed.rng();
    if method == FgnMethod::Dense {
        return Ok(fgn_dense(h, n, &mut rng));
    }
    match circulant_eigenvalues(h, n) {
        Some(eigen) => Ok(fgn_circulant(&eigen, n, &mut rng)),
        None => Ok(fgn_dense(h, n, &mut rng)),
    }
}

/// Spectrum of the circulant embedding for `n` points, or `None` when an
/// eigenvalue falls below [`NEGATIVE_EIGEN_TOL`]. Small negatives are
/// clamped to zero.
pub fn circulant_eigenvalues(h: f64, n: usize) -> Option<Vec<f64>> {
    let m = n.next_power_of_two().max(1);
    let size = 2 * m;
    let mut row: Vec<Complex64> = (0..size)
        .map(|k| Complex64::new(fgn_autocovariance(h, k.min(size - k)), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    let mut eigen = Vec::with_capacity(size);
    for c in row {
        if c.re < NEGATIVE_EIGEN_TOL {
            return None;
        }
        eigen.push(c.re.max(0.0));
    }
    Some(eigen)
}

fn fgn_circulant<R: Rng>(eigen: &[f64], n: usize, rng: &mut R) -> Vec<f64> {
    let size = eigen.len();
    let scale = 1.0 / size as f64;
    let mut w: Vec<Complex64> = eigen
        .iter()
        .map(|&lambda| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex64::new(a, b) * (lambda * scale).sqrt()
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut w);
    w.into_iter().take(n).map(|c| c.re).collect()
}

fn fgn_dense<R: Rng>(h: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(h, k)).collect();
    let lower = toeplitz_cholesky(&gamma);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    (0..n)
        .map(|i| {
            let row = &lower[i * n..i * n + i + 1];
            row.iter().zip(&z).map(|(l, z)| l * z).sum()
        })
        .collect()
}

/// Row-major lower Cholesky factor of the symmetric Toeplitz matrix with
/// first row `gamma`. Non-positive pivots (semi-definite input) give a zero
/// column.
fn toeplitz_cholesky(gamma: &[f64]) -> Vec<f64> {
    let n = gamma.len();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let diag = gamma[0] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if diag <= 1e-14 * gamma[0] {
            continue;
        }
        let d = diag.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let dot: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            l[i * n + j] = (gamma[i - j] - dot) / d;
        }
    }
    l
}

/// Log-Euler FBM prices: `S[t+1] = S[t]·exp(mu + sigma·G[t])` with `G`
/// fractional Gaussian noise of `len - 1` points.
pub fn gen_fbm_price(p: &FbmParams, seed: Seed) -> Result<PriceSeries> {
    p.validate()?;
    let noise = gen_fgn(p.hurst, p.len - 1, seed)?;
    let steps = noise.into_iter().map(|g| p.mu + p.sigma * g);
    PriceSeries::new(exp_path(p.s0, steps, p.len), "fbm")
}
