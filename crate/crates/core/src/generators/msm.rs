//! Binomial Markov-switching multifractal volatility.
//!
//! `K` two-state multipliers `M[k] ∈ {m0, 2 - m0}` switch at geometrically
//! spaced frequencies. Component `k` (1-based) redraws its state with
//! probability `gamma_k = 1 - (1 - gamma_K)^(b^(k - K))`, and the daily
//! log-return is `sigma_bar · sqrt(prod M) · eps` with `eps` standard normal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_common, exp_path};
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::series::PriceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsmParams {
    pub m0: f64,
    pub k: usize,
    pub gamma_k: f64,
    pub b: f64,
    pub sigma_bar: f64,
    pub s0: f64,
    pub len: usize,
}

impl MsmParams {
    pub const DEFAULT_K: usize = 8;
    pub const DEFAULT_GAMMA_K: f64 = 0.5;
    pub const DEFAULT_B: f64 = 2.0;

    pub fn validate(&self) -> Result<()> {
        check_common(self.s0, self.len)?;
        let bad = |msg: String| Err(Error::Validation(msg));
        if !(1.0..2.0).contains(&self.m0) {
            return bad(format!("MSM m0 {} outside [1, 2)", self.m0));
        }
        if self.k == 0 || self.k > 64 {
            return bad(format!("MSM needs 1..=64 components, got {}", self.k));
        }
        if !(self.gamma_k > 0.0 && self.gamma_k < 1.0) {
            return bad(format!("MSM gamma_K {} outside (0, 1)", self.gamma_k));
        }
        if !(self.b > 1.0 && self.b.is_finite()) {
            return bad(format!("MSM frequency factor b = {} must exceed 1", self.b));
        }
        if !(self.sigma_bar > 0.0 && self.sigma_bar.is_finite()) {
            return bad(format!("MSM sigma_bar {} must be > 0", self.sigma_bar));
        }
        Ok(())
    }

    /// Switching probability of each component, lowest frequency first.
    pub fn switch_probabilities(&self) -> Vec<f64> {
        (1..=self.k)
            .map(|k| 1.0 - (1.0 - self.gamma_k).powf(self.b.powi(k as i32 - self.k as i32)))
            .collect()
    }
}

/// Simulated returns with the multiplier state of every day. Bit `k` of
/// `states[t]` is set when component `k` (0-based) sits at `m0`.
#[derive(Debug, Clone)]
pub struct MsmPath {
    pub returns: Vec<f64>,
    pub states: Vec<u64>,
}

pub fn simulate_msm(p: &MsmParams, n: usize, seed: Seed) -> Result<MsmPath> {
    p.validate()?;
    let mut rng = seed.rng();
    let gammas = p.switch_probabilities();
    let low = 2.0 - p.m0;
    let mut state: u64 = 0;
    for k in 0..p.k {
        if rng.gen::<bool>() {
            state |= 1 << k;
        }
    }
    let mut returns = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        for (k, &g) in gammas.iter().enumerate() {
            if rng.gen::<f64>() < g {
                if rng.gen::<bool>() {
                    state |= 1 << k;
                } else {
                    state &= !(1 << k);
                }
            }
        }
        let high = state.count_ones() as i32;
        let product = p.m0.powi(high) * low.powi(p.k as i32 - high);
        let eps: f64 = StandardNormal.sample(&mut rng);
        returns.push(p.sigma_bar * product.sqrt() * eps);
        states.push(state);
    }
    Ok(MsmPath { returns, states })
}

/// `S[t] = S[t-1]·exp(R[t])` driven by [`simulate_msm`].
pub fn gen_msm_price(p: &MsmParams, seed: Seed) -> Result<PriceSeries> {
    let path = simulate_msm(p, p.len.saturating_sub(1), seed)?;
    PriceSeries::new(exp_path(p.s0, path.returns, p.len), "msm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{autocorrelation, batch_means_stderr, sample_std};

    fn params(m0: f64, len: usize) -> MsmParams {
        MsmParams {
            m0,
            k: MsmParams::DEFAULT_K,
            gamma_k: MsmParams::DEFAULT_GAMMA_K,
            b: MsmParams::DEFAULT_B,
            sigma_bar: 0.02,
            s0: 100.0,
            len,
        }
    }

    #[test]
    fn switch_probabilities_are_geometric() {
        let g = params(1.4, 10).switch_probabilities();
        assert_eq!(g.len(), 8);
        assert!((g[7] - 0.5).abs() < 1e-15);
        assert!((g[0] - (1.0 - 0.5f64.powf(2f64.powi(-7)))).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn degenerate_multiplier_is_gaussian() {
        let n = 1_000_000;
        let path = simulate_msm(&params(1.0, n + 1), n, Seed::from(1)).unwrap();
        let sd = sample_std(&path.returns);
        assert!(
            (sd - 0.02).abs() < 3.0 * 0.02 / (2.0 * n as f64).sqrt(),
            "sd={sd}"
        );
    }

    #[test]
    fn long_run_variance_matches_sigma_bar() {
        let n = 1_000_000;
        let path = simulate_msm(&params(1.4, n + 1), n, Seed::from(2)).unwrap();
        let sq: Vec<f64> = path.returns.iter().map(|r| r * r).collect();
        let var = sq.iter().sum::<f64>() / n as f64;
        let se = batch_means_stderr(&sq, 100);
        assert!((var - 0.0004).abs() < 3.0 * se, "var={var} se={se}");
    }

    #[test]
    fn multiplier_marginals_are_balanced() {
        let n = 1_000_000;
        let p = params(1.4, n + 1);
        let path = simulate_msm(&p, n, Seed::from(3)).unwrap();
        for k in 0..p.k {
            let high = path.states.iter().filter(|s| *s & (1 << k) != 0).count();
            let frac = high as f64 / n as f64;
            assert!((frac - 0.5).abs() < 0.01, "k={k} frac={frac}");
        }
    }

    #[test]
    fn volatility_clusters() {
        let n = 100_000;
        let path = simulate_msm(&params(1.4, n + 1), n, Seed::from(4)).unwrap();
        let sq: Vec<f64> = path.returns.iter().map(|r| r * r).collect();
        assert!(autocorrelation(&sq, 1) > 0.05);
    }

    #[test]
    fn prices_follow_returns() {
        let p = params(1.3, 50);
        let s = gen_msm_price(&p, Seed::from(5)).unwrap();
        let path = simulate_msm(&p, 49, Seed::from(5)).unwrap();
        let r = s.to_returns(1).unwrap().values;
        for (a, b) in r.iter().zip(&path.returns) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = params(2.0, 10);
        assert!(p.validate().is_err());
        p.m0 = 1.4;
        p.b = 1.0;
        assert!(p.validate().is_err());
        p.b = 2.0;
        p.gamma_k = 1.0;
        assert!(p.validate().is_err());
    }
}
