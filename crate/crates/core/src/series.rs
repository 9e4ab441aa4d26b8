//! Price and log-return series, CSV ingestion, shuffling and drift/volatility
//! estimation.
//!
//! Day indices are zero-based: a series of length `T` has days `0..T`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Strictly positive daily closing prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    values: Vec<f64>,
    label: String,
}

/// Log-returns `ln(S[k + lag] / S[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub lag: usize,
}

/// Per-day drift and volatility of a log-normal price model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftVol {
    pub mu: f64,
    pub sigma: f64,
}

impl DriftVol {
    /// Built-in calibration used when no price data is supplied: typical
    /// daily drift and volatility of a large-cap equity.
    pub const DEFAULT: DriftVol = DriftVol {
        mu: 0.0003,
        sigma: 0.03,
    };
}

impl Default for DriftVol {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl PriceSeries {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.len() < 2 {
            return Err(Error::Validation(format!(
                "series '{label}' has {} prices, need at least 2",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Validation(format!(
                "series '{label}' has non-positive or non-finite price {v} at day {i}"
            )));
        }
        Ok(Self { values, label })
    }

    /// Builds `S[0] = s0, S[k+1] = S[k]·exp(r[k])` from lag-1 returns.
    pub fn from_returns(s0: f64, returns: &ReturnSeries, label: impl Into<String>) -> Result<Self> {
        if returns.lag != 1 {
            return Err(Error::Validation(format!(
                "price reconstruction needs lag-1 returns, got lag {}",
                returns.lag
            )));
        }
        Self::new(prices_from_returns(s0, &returns.values), label)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `ln(S[t] / S[t - lag])`.
    pub fn log_return(&self, t: usize, lag: usize) -> Result<f64> {
        if lag == 0 || t < lag || t >= self.values.len() {
            return Err(Error::Range(format!(
                "log return at day {t} with lag {lag} on a series of length {}",
                self.values.len()
            )));
        }
        Ok((self.values[t] / self.values[t - lag]).ln())
    }

    pub fn to_returns(&self, lag: usize) -> Result<ReturnSeries> {
        if lag == 0 || lag >= self.values.len() {
            return Err(Error::Range(format!(
                "lag {lag} on a series of length {}",
                self.values.len()
            )));
        }
        let values = self
            .values
            .windows(lag + 1)
            .map(|w| (w[lag] / w[0]).ln())
            .collect();
        Ok(ReturnSeries { values, lag })
    }

    /// Lag-1 returns reordered by `perm` (`out[k] = returns[perm[k]]`).
    pub fn permuted_returns(&self, perm: &[usize]) -> Result<ReturnSeries> {
        let returns = self.to_returns(1)?;
        if perm.len() != returns.values.len() {
            return Err(Error::Validation(format!(
                "permutation of length {} for {} returns",
                perm.len(),
                returns.values.len()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &k in perm {
            if k >= perm.len() || std::mem::replace(&mut seen[k], true) {
                return Err(Error::Validation("not a permutation".into()));
            }
        }
        Ok(ReturnSeries {
            values: perm.iter().map(|&k| returns.values[k]).collect(),
            lag: 1,
        })
    }

    /// Rebuilds the path from the first price with its lag-1 returns
    /// reordered by `perm`.
    pub fn permute_returns(&self, perm: &[usize]) -> Result<Self> {
        let r = self.permuted_returns(perm)?;
        Self::from_returns(self.first(), &r, self.label.clone())
    }

    /// Lag-1 returns under a uniform random permutation (Fisher–Yates).
    pub fn shuffled_returns(&self, seed: Seed) -> Result<ReturnSeries> {
        if self.values.len() < 3 {
            return Err(Error::Validation(format!(
                "shuffling needs at least 3 prices, series '{}' has {}",
                self.label,
                self.values.len()
            )));
        }
        let mut perm: Vec<usize> = (0..self.values.len() - 1).collect();
        perm.shuffle(&mut seed.rng());
        self.permuted_returns(&perm)
    }

    /// Shuffles the lag-1 returns in time and rebuilds the path from the
    /// original first price.
    pub fn shuffle_returns(&self, seed: Seed) -> Result<Self> {
        let r = self.shuffled_returns(seed)?;
        Self::from_returns(self.first(), &r, self.label.clone())
    }

    /// Sample drift and volatility of lag-1 log-returns. `sigma` uses the
    /// `n - 1` divisor; `mu = mean + sigma²/2` so that a GBM with these
    /// parameters reproduces the sample log-return moments.
    pub fn estimate_drift_vol(&self) -> Result<DriftVol> {
        if self.values.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "series '{}' needs at least 3 prices to estimate volatility",
                self.label
            )));
        }
        Ok(drift_vol_of(&self.to_returns(1)?.values))
    }
}

/// `S[0] = s0`, `S[k+1] = S[k]·exp(r[k])`.
pub fn prices_from_returns(s0: f64, returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    let mut s = s0;
    out.push(s);
    for r in returns {
        s *= r.exp();
        out.push(s);
    }
    out
}

fn drift_vol_of(returns: &[f64]) -> DriftVol {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    DriftVol {
        mu: mean + 0.5 * var,
        sigma,
    }
}

/// Drift and volatility of the pooled lag-1 returns of every series.
pub fn estimate_pooled_drift_vol(series: &[PriceSeries]) -> Result<DriftVol> {
    let mut pooled = Vec::new();
    for s in series {
        pooled.extend(s.to_returns(1)?.values);
    }
    if pooled.len() < 2 {
        return Err(Error::InsufficientData(
            "pooled estimate needs at least 2 returns".into(),
        ));
    }
    Ok(drift_vol_of(&pooled))
}

/// Loads one series from a `DATE,CLOSE` file, or one per `*.csv` file of a
/// directory (sorted by file name, labelled by file stem).
pub fn load_prices(path: impl AsRef<Path>) -> Result<Vec<PriceSeries>> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if !meta.is_dir() {
        return Ok(vec![load_price_file(path)?]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no .csv price files in {}",
            path.display()
        )));
    }
    files.iter().map(load_price_file).collect()
}

pub fn load_price_file(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_price_csv(&text, path, label)
}

/// Parses the `DATE,CLOSE` schema. Rows are ordered by date; only the
/// ordering of dates is used.
pub fn parse_price_csv(text: &str, path: &Path, label: String) -> Result<PriceSeries> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 2
        || !cols[0].eq_ignore_ascii_case("DATE")
        || !cols[1].eq_ignore_ascii_case("CLOSE")
    {
        return Err(parse_err(
            hline,
            format!("expected header DATE,CLOSE, got '{header}'"),
        ));
    }

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, got {}", fields.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date '{}': {e}", fields[0])))?;
        if fields[1].is_empty() {
            return Err(Error::Validation(format!(
                "{}:{line}: missing price",
                path.display()
            )));
        }
        let price: f64 = fields[1]
            .parse()
            .map_err(|e| parse_err(line, format!("bad price '{}': {e}", fields[1])))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::Validation(format!(
                "{}:{line}: non-positive price {price}",
                path.display()
            )));
        }
        rows.push((date, price));
    }
    if rows.is_empty() {
        return Err(parse_err(hline, "no data rows".into()));
    }
    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Validation(format!(
            "{}: duplicate date {}",
            path.display(),
            w[0].0
        )));
    }
    PriceSeries::new(rows.into_iter().map(|(_, p)| p).collect(), label)
}

/// First synthetic date written for generated series.
pub fn synthetic_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1999, 1, 4).expect("valid date")
}

/// Renders a series in the `DATE,CLOSE` schema with daily synthetic dates.
pub fn to_price_csv(series: &PriceSeries, start: NaiveDate) -> String {
    let mut out = String::from("DATE,CLOSE\n");
    for (date, price) in start.iter_days().zip(series.values()) {
        out.push_str(&format!("{},{}\n", date.format("%Y-%m-%d"), price));
    }
    out
}

pub fn write_price_csv(series: &PriceSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_price_csv(series, synthetic_start_date())).map_err(|e| Error::io(path, e))
}
