//! Power-law fits of local-maxima counts, `M ~ N^a`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which resolutions enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWindow {
    /// The largest `ceil(k/2)` of `k` resolutions.
    #[default]
    LargestHalf,
    All,
    /// The largest `count` resolutions.
    Largest {
        count: usize,
    },
    /// Resolutions in `[min_n, max_n]`.
    Range {
        min_n: usize,
        max_n: usize,
    },
}

impl FitWindow {
    fn select(&self, sorted: &[(usize, f64)]) -> Vec<(usize, f64)> {
        let k = sorted.len();
        match *self {
            FitWindow::LargestHalf => sorted[k - k.div_ceil(2)..].to_vec(),
            FitWindow::All => sorted.to_vec(),
            FitWindow::Largest { count } => sorted[k - count.min(k)..].to_vec(),
            FitWindow::Range { min_n, max_n } => sorted
                .iter()
                .copied()
                .filter(|(n, _)| (min_n..=max_n).contains(n))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Slope of `ln M` against `ln N`.
    pub a: f64,
    pub log_intercept: f64,
    pub stderr_a: f64,
    pub fit_ns: Vec<usize>,
    pub r_squared: f64,
}

/// Ordinary least squares of `ln M` on `ln N` over the window. Points with
/// `M = 0` are dropped; at least three must remain.
pub fn fit_exponent(points: &[(usize, f64)], window: FitWindow) -> Result<ScalingFit> {
    if points.is_empty() {
        return Err(Error::InsufficientData("no (N, M) points".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|(n, _)| *n);
    let used: Vec<(usize, f64)> = window
        .select(&sorted)
        .into_iter()
        .filter(|(n, m)| *n > 0 && *m > 0.0)
        .collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} point(s) with M > 0 in the fit window, need 3",
            used.len()
        )));
    }

    let k = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, m)| m.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let syy: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let a = sxy / sxx;
    let intercept = y_mean - a * x_mean;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - a * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(ScalingFit {
        a,
        log_intercept: intercept,
        stderr_a: (ssr / (k - 2.0) / sxx).sqrt(),
        fit_ns: used.iter().map(|(n, _)| *n).collect(),
        r_squared,
    })
}

/// Serialized fit with the data it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub label: String,
    pub a: f64,
    pub stderr_a: f64,
    pub r_squared: f64,
    #[serde(rename = "fit_Ns")]
    pub fit_ns: Vec<usize>,
    pub points: Vec<FitPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: f64,
}

impl FitReport {
    pub fn new(label: impl Into<String>, fit: &ScalingFit, points: &[(usize, f64)]) -> Self {
        Self {
            label: label.into(),
            a: fit.a,
            stderr_a: fit.stderr_a,
            r_squared: fit.r_squared,
            fit_ns: fit.fit_ns.clone(),
            points: points.iter().map(|&(n, m)| FitPoint { n, m }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub label: String,
    pub a: f64,
    pub stderr_a: f64,
}

/// Exponents side by side. `rows` are sorted by label; the monotonicity
/// flags refer to the input order, which is taken as parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub rows: Vec<ExponentRow>,
    pub spread: f64,
    pub strictly_increasing: bool,
    pub strictly_decreasing: bool,
}

impl ExponentTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,a,stderr_a\n");
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.label, r.a, r.stderr_a).expect("write to string");
        }
        out
    }
}

pub fn compare_exponents(fits: &[(String, ScalingFit)]) -> Result<ExponentTable> {
    if fits.is_empty() {
        return Err(Error::InsufficientData("no fits to compare".into()));
    }
    let a: Vec<f64> = fits.iter().map(|(_, f)| f.a).collect();
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rows: Vec<ExponentRow> = fits
        .iter()
        .map(|(label, f)| ExponentRow {
            label: label.clone(),
            a: f.a,
            stderr_a: f.stderr_a,
        })
        .collect();
    rows.sort_by(|x, y| x.label.cmp(&y.label));
    Ok(ExponentTable {
        rows,
        spread: max - min,
        strictly_increasing: a.windows(2).all(|w| w[0] < w[1]),
        strictly_decreasing: a.windows(2).all(|w| w[0] > w[1]),
    })
}
