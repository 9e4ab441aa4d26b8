//! Synthetic daily price generators: geometric Brownian motion, fractional
//! Brownian motion, symmetric Lévy-stable and binomial MSM.
//!
//! All generators are pure functions of their parameters and a [`Seed`].
//! Time steps are one trading day.

pub mod fgn;
pub mod gbm;
pub mod msm;
pub mod stable;

use serde::{Deserialize, Serialize};

pub use fgn::{fgn_autocovariance, gen_fbm_price, gen_fgn, gen_fgn_with, FbmParams, FgnMethod};
pub use gbm::{gen_gbm, GbmParams};
pub use msm::{gen_msm_price, simulate_msm, MsmParams, MsmPath};
pub use stable::{
    gen_levy_price, levy_scale_for_sigma, sample_stable, stable_cdf, stable_quantile, LevyParams,
};

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::series::{DriftVol, PriceSeries};

/// Trading days in the reference dataset.
pub const DEFAULT_LEN: usize = 2918;
pub const DEFAULT_S0: f64 = 100.0;

pub(crate) fn check_common(s0: f64, len: usize) -> Result<()> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::Validation(format!("initial price {s0} must be > 0")));
    }
    if len < 2 {
        return Err(Error::Validation(format!(
            "series length {len} must be >= 2"
        )));
    }
    Ok(())
}

/// `S[0] = s0`, `S[t] = s0·exp(sum of the first t log steps)`.
pub(crate) fn exp_path(s0: f64, steps: impl IntoIterator<Item = f64>, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    out.push(s0);
    let mut x = 0.0;
    for step in steps {
        x += step;
        out.push(s0 * x.exp());
    }
    out
}

/// Declarative generator description. Omitted drift/volatility/scale fields
/// are filled from a [`DriftVol`] calibration by [`GeneratorConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default = "default_len")]
    pub len: usize,
}

fn default_s0() -> f64 {
    DEFAULT_S0
}

fn default_len() -> usize {
    DEFAULT_LEN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Gbm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    Fbm {
        hurst: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    Levy {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    Msm {
        m0: f64,
        #[serde(default = "default_msm_k")]
        k: usize,
        #[serde(default = "default_msm_gamma_k")]
        gamma_k: f64,
        #[serde(default = "default_msm_b")]
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_bar: Option<f64>,
    },
}

fn default_msm_k() -> usize {
    MsmParams::DEFAULT_K
}

fn default_msm_gamma_k() -> f64 {
    MsmParams::DEFAULT_GAMMA_K
}

fn default_msm_b() -> f64 {
    MsmParams::DEFAULT_B
}

impl GeneratorConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            s0: DEFAULT_S0,
            len: DEFAULT_LEN,
        }
    }

    pub fn gbm() -> Self {
        Self::new(ModelConfig::Gbm {
            mu: None,
            sigma: None,
        })
    }

    pub fn fbm(hurst: f64) -> Self {
        Self::new(ModelConfig::Fbm {
            hurst,
            mu: None,
            sigma: None,
        })
    }

    pub fn levy(alpha: f64) -> Self {
        Self::new(ModelConfig::Levy { alpha, c: None })
    }

    pub fn msm(m0: f64) -> Self {
        Self::new(ModelConfig::Msm {
            m0,
            k: MsmParams::DEFAULT_K,
            gamma_k: MsmParams::DEFAULT_GAMMA_K,
            b: MsmParams::DEFAULT_B,
            sigma_bar: None,
        })
    }

    pub fn with_len(mut self, len: usize) -> Self {
        self.len = len;
        self
    }

    /// Fills unset fields from `calib`:
    /// - GBM: `mu`, `sigma` directly;
    /// - FBM: `sigma`, and log drift `mu - sigma²/2` so the mean log-return
    ///   matches the calibration;
    /// - Lévy: `c` such that daily log-returns have the interquartile range
    ///   of `Normal(0, sigma²)`;
    /// - MSM: `sigma_bar = sigma`.
    pub fn resolve(&self, calib: DriftVol) -> Result<Generator> {
        let (s0, len) = (self.s0, self.len);
        let g = match self.model {
            ModelConfig::Gbm { mu, sigma } => Generator::Gbm(GbmParams {
                mu: mu.unwrap_or(calib.mu),
                sigma: sigma.unwrap_or(calib.sigma),
                s0,
                len,
            }),
            ModelConfig::Fbm { hurst, mu, sigma } => {
                let sigma = sigma.unwrap_or(calib.sigma);
                Generator::Fbm(FbmParams {
                    hurst,
                    mu: mu.unwrap_or(calib.mu - 0.5 * calib.sigma * calib.sigma),
                    sigma,
                    s0,
                    len,
                })
            }
            ModelConfig::Levy { alpha, c } => Generator::Levy(LevyParams {
                alpha,
                c: match c {
                    Some(c) => c,
                    None => levy_scale_for_sigma(alpha, calib.sigma)?,
                },
                s0,
                len,
            }),
            ModelConfig::Msm {
                m0,
                k,
                gamma_k,
                b,
                sigma_bar,
            } => Generator::Msm(MsmParams {
                m0,
                k,
                gamma_k,
                b,
                sigma_bar: sigma_bar.unwrap_or(calib.sigma),
                s0,
                len,
            }),
        };
        g.validate()?;
        Ok(g)
    }
}

/// Fully specified generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Generator {
    Gbm(GbmParams),
    Fbm(FbmParams),
    Levy(LevyParams),
    Msm(MsmParams),
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Gbm(p) => p.validate(),
            Generator::Fbm(p) => p.validate(),
            Generator::Levy(p) => p.validate(),
            Generator::Msm(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Gbm(_) => "gbm",
            Generator::Fbm(_) => "fbm",
            Generator::Levy(_) => "levy",
            Generator::Msm(_) => "msm",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Generator::Gbm(p) => p.len,
            Generator::Fbm(p) => p.len,
            Generator::Levy(p) => p.len,
            Generator::Msm(p) => p.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generate(&self, seed: Seed) -> Result<PriceSeries> {
        let mut s = match self {
            Generator::Gbm(p) => gen_gbm(p, seed),
            Generator::Fbm(p) => gen_fbm_price(p, seed),
            Generator::Levy(p) => gen_levy_price(p, seed),
            Generator::Msm(p) => gen_msm_price(p, seed),
        }?;
        s.set_label(format!("{}-{:04}", self.name(), seed.stream));
        Ok(s)
    }
}
