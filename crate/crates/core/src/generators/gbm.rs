use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_common, exp_path};
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::series::PriceSeries;

/// Geometric Brownian motion with daily drift and volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub s0: f64,
    pub len: usize,
}

impl GbmParams {
    pub fn validate(&self) -> Result<()> {
        check_common(self.s0, self.len)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite() && self.mu.is_finite()) {
            return Err(Error::Validation(format!(
                "GBM needs finite mu and sigma >= 0, got mu={} sigma={}",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }
}

/// Exact log-Euler scheme with a one-day step:
/// `S[t+1] = S[t]·exp((mu - sigma²/2) + sigma·Z[t])`.
pub fn gen_gbm(p: &GbmParams, seed: Seed) -> Result<PriceSeries> {
    p.validate()?;
    let mut rng = seed.rng();
    let drift = p.mu - 0.5 * p.sigma * p.sigma;
    let steps = (1..p.len).map(|_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        drift + p.sigma * z
    });
    PriceSeries::new(exp_path(p.s0, steps, p.len), "gbm")
}
