//! Symmetric alpha-stable draws and Lévy-process prices.

use std::f64::consts::{FRAC_PI_2, PI};

use libm::erf;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{check_common, exp_path};
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::series::PriceSeries;

/// Upper quartile of the standard normal distribution.
const NORMAL_Q75: f64 = 0.674_489_750_196_081_7;

/// Largest admissible one-day log-price move of a Lévy path. Larger
/// increments are clamped; every move this size already crosses any
/// threshold of the strategy grids, and the clamp keeps prices finite.
pub const MAX_LOG_STEP: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub alpha: f64,
    /// Per-day increment scale.
    pub c: f64,
    pub s0: f64,
    pub len: usize,
}

impl LevyParams {
    pub fn validate(&self) -> Result<()> {
        check_common(self.s0, self.len)?;
        check_alpha(self.alpha)?;
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::Validation(format!(
                "Lévy scale {} must be >= 0",
                self.c
            )));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "stability index {alpha} outside (0, 2]"
        )))
    }
}

/// One draw of the standard symmetric alpha-stable law (characteristic
/// function `exp(-|u|^alpha)`) by the Chambers–Mallows–Stuck transform.
/// At `alpha = 2` this is `Normal(0, 2)`; at `alpha = 1` standard Cauchy.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = loop {
        let u = PI * (rng.gen::<f64>() - 0.5);
        if u > -FRAC_PI_2 {
            break u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    let cos_u = u.cos();
    (alpha * u).sin() / cos_u.powf(1.0 / alpha)
        * (((1.0 - alpha) * u).cos() / e).powf((1.0 - alpha) / alpha)
}

/// Cumulative sum of clamped `c·X` increments from [`sample_stable`], with
/// `S[0] = s0`.
pub fn gen_levy_price(p: &LevyParams, seed: Seed) -> Result<PriceSeries> {
    p.validate()?;
    let mut rng = seed.rng();
    let steps = (1..p.len).map(|_| {
        let x = p.c * sample_stable(p.alpha, &mut rng);
        x.clamp(-MAX_LOG_STEP, MAX_LOG_STEP)
    });
    PriceSeries::new(exp_path(p.s0, steps, p.len), "levy")
}

/// Distribution function of the standard symmetric stable law, from
/// Zolotarev's integral representation.
pub fn stable_cdf(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    if x < 0.0 {
        return 1.0 - stable_cdf(-x, alpha);
    }
    if alpha == 1.0 {
        return 0.5 + x.atan() / PI;
    }
    if alpha == 2.0 {
        return 0.5 * (1.0 + erf(x / 2.0));
    }
    let power = alpha / (alpha - 1.0);
    let scaled = x.powf(power);
    let integrand = |theta: f64| {
        let v = (theta.cos() / (alpha * theta).sin()).powf(power) * ((alpha - 1.0) * theta).cos()
            / theta.cos();
        let g = (-scaled * v).exp();
        if g.is_finite() {
            g
        } else if alpha > 1.0 {
            0.0
        } else {
            1.0
        }
    };
    let integral = adaptive_simpson(&integrand, 1e-12, FRAC_PI_2 - 1e-12, 1e-13, 50);
    if alpha < 1.0 {
        0.5 + integral / PI
    } else {
        1.0 - integral / PI
    }
}

/// Quantile of the standard symmetric stable law for `prob` in (0, 1).
pub fn stable_quantile(prob: f64, alpha: f64) -> f64 {
    if prob == 0.5 {
        return 0.0;
    }
    if prob < 0.5 {
        return -stable_quantile(1.0 - prob, alpha);
    }
    let mut hi = 1.0;
    while stable_cdf(hi, alpha) < prob {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if stable_cdf(mid, alpha) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Scale `c` for which `c·X` has the interquartile range of
/// `Normal(0, sigma²)`.
pub fn levy_scale_for_sigma(alpha: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(sigma * NORMAL_Q75 / stable_quantile(0.75, alpha))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, depth)
}
