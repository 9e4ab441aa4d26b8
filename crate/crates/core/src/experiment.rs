//! End-to-end experiments: obtain series, sweep resolutions, average, fit.
//!
//! Work is split by series and merged by index, so a report depends only on
//! its configuration and master seed, never on the number of worker
//! threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::StrategyParams;
use crate::error::{Error, Result};
use crate::generators::{Generator, GeneratorConfig};
use crate::landscape::{
    build_landscape, check_ladder, ensemble_mean_m, sweep_resolutions, Averaging, Neighborhood,
    ProfitGrid, SweepResult, DEFAULT_NS,
};
use crate::rng::Seed;
use crate::scaling::{fit_exponent, FitReport, FitWindow, ScalingFit};
use crate::series::{estimate_pooled_drift_vol, load_prices, DriftVol};
use crate::stats::{mean, sample_std};

pub const SCHEMA_VERSION: u32 = 1;

/// Stream ids with this bit set drive return shuffling, keeping shuffles
/// independent of the generator draws of the same realization.
const SHUFFLE_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Data {
        data_dir: PathBuf,
    },
    Generated {
        generator: GeneratorConfig,
        realizations: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub label: String,
    /// Value of the swept model parameter, for exponent-vs-parameter tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    pub source: Source,
    pub strategy: StrategyParams,
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default)]
    pub neighborhood: Neighborhood,
    #[serde(default = "default_domain_scale")]
    pub domain_scale: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default)]
    pub fit_window: FitWindow,
    #[serde(default)]
    pub averaging: Averaging,
    /// Price files whose pooled drift and volatility calibrate the
    /// generator; built-in defaults otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_dir: Option<PathBuf>,
    /// Keep the landscapes of the first series for plotting.
    #[serde(default)]
    pub save_landscapes: bool,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

fn default_ns() -> Vec<usize> {
    DEFAULT_NS.to_vec()
}

fn default_domain_scale() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn generated(
        label: impl Into<String>,
        generator: GeneratorConfig,
        realizations: usize,
    ) -> Self {
        Self::with_source(
            label,
            Source::Generated {
                generator,
                realizations,
            },
        )
    }

    pub fn from_data(label: impl Into<String>, data_dir: impl Into<PathBuf>) -> Self {
        Self::with_source(
            label,
            Source::Data {
                data_dir: data_dir.into(),
            },
        )
    }

    fn with_source(label: impl Into<String>, source: Source) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            label: label.into(),
            param: None,
            source,
            strategy: StrategyParams::default(),
            ns: default_ns(),
            neighborhood: Neighborhood::default(),
            domain_scale: 1.0,
            master_seed: 0,
            shuffle: false,
            fit_window: FitWindow::default(),
            averaging: Averaging::default(),
            calibration_dir: None,
            save_landscapes: false,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.label.is_empty() || self.label.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "invalid experiment label '{}'",
                self.label
            )));
        }
        check_ladder(&self.ns)?;
        self.strategy.with_thresholds(0.0, 0.0).validate()?;
        if !(self.domain_scale > 0.0 && self.domain_scale.is_finite()) {
            return Err(Error::Config(format!(
                "domain scale {} must be > 0",
                self.domain_scale
            )));
        }
        if let Source::Generated {
            realizations: 0, ..
        } = self.source
        {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        Ok(())
    }
}

/// One experiment or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigFile {
    Suite {
        schema_version: u32,
        experiments: Vec<ExperimentConfig>,
    },
    Single(Box<ExperimentConfig>),
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<ExperimentConfig>> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Vec<ExperimentConfig>> {
        let file: ConfigFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid experiment config: {e}")))?;
        let experiments = match file {
            ConfigFile::Single(cfg) => vec![*cfg],
            ConfigFile::Suite {
                schema_version,
                experiments,
            } => {
                if schema_version != SCHEMA_VERSION {
                    return Err(Error::Config(format!(
                        "unsupported schema_version {schema_version}"
                    )));
                }
                experiments
            }
        };
        if experiments.is_empty() {
            return Err(Error::Config("config lists no experiments".into()));
        }
        for cfg in &experiments {
            cfg.validate()?;
        }
        Ok(experiments)
    }
}

/// Spread of exponents fitted to each series on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationFits {
    pub fitted: usize,
    pub failed: usize,
    pub mean_a: Option<f64>,
    pub std_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub series: usize,
    /// Sum over series and resolutions of `N²`.
    pub cells: u64,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    pub calibration: DriftVol,
    pub sweeps: Vec<SweepResult>,
    pub mean_m: Vec<(usize, f64)>,
    pub fit: Option<ScalingFit>,
    pub fit_error: Option<String>,
    pub realization_fits: RealizationFits,
    pub telemetry: Telemetry,
    #[serde(skip)]
    pub landscapes: Vec<ProfitGrid>,
}

impl ExperimentReport {
    /// Ensemble exponent, or the recorded fitting failure.
    pub fn exponent(&self) -> Result<f64> {
        match &self.fit {
            Some(f) => Ok(f.a),
            None => Err(Error::InsufficientData(
                self.fit_error.clone().unwrap_or_else(|| "no fit".into()),
            )),
        }
    }

    pub fn fit_report(&self) -> Option<FitReport> {
        self.fit
            .as_ref()
            .map(|f| FitReport::new(self.config.label.clone(), f, &self.mean_m))
    }

    pub fn mvsn_csv(&self) -> String {
        let mut out = String::from("N,M\n");
        for (n, m) in &self.mean_m {
            writeln!(out, "{n},{m}").expect("write to string");
        }
        out
    }

    pub fn sweeps_csv(&self) -> String {
        let mut out = String::from("series,N,M\n");
        for s in &self.sweeps {
            for p in &s.points {
                writeln!(out, "{},{},{}", s.label, p.n, p.m).expect("write to string");
            }
        }
        out
    }
}

/// Runs on `jobs` worker threads (all cores when `None`).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let calibration = match &cfg.calibration_dir {
        Some(dir) => estimate_pooled_drift_vol(&load_prices(dir)?)?,
        None => DriftVol::DEFAULT,
    };

    let (generator, mut series) = match &cfg.source {
        Source::Data { data_dir } => (None, load_prices(data_dir)?),
        Source::Generated {
            generator,
            realizations,
        } => {
            let g = generator.resolve(calibration)?;
            let series = (0..*realizations as u64)
                .into_par_iter()
                .map(|k| g.generate(Seed::new(cfg.master_seed, k)))
                .collect::<Result<Vec<_>>>()?;
            (Some(g), series)
        }
    };

    let min_len = cfg.strategy.d + 2;
    if let Some(s) = series.iter().find(|s| s.len() < min_len) {
        return Err(Error::Validation(format!(
            "series '{}' has {} prices, lag {} needs at least {min_len}",
            s.label(),
            s.len(),
            cfg.strategy.d
        )));
    }

    if cfg.shuffle {
        series = series
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                s.shuffle_returns(Seed::new(cfg.master_seed, k as u64 | SHUFFLE_STREAM_BIT))
            })
            .collect::<Result<Vec<_>>>()?;
    }

    let sweeps = series
        .par_iter()
        .map(|s| {
            sweep_resolutions(
                s,
                &cfg.strategy,
                &cfg.ns,
                cfg.neighborhood,
                cfg.domain_scale,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let landscapes = if cfg.save_landscapes {
        cfg.ns
            .iter()
            .map(|&n| build_landscape(&series[0], &cfg.strategy, n, cfg.domain_scale))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mean_m = ensemble_mean_m(&sweeps, cfg.averaging)?;
    let (fit, fit_error) = match fit_exponent(&mean_m, cfg.fit_window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let per_series: Vec<f64> = sweeps
        .iter()
        .filter_map(|s| {
            let pts: Vec<(usize, f64)> = s.points.iter().map(|p| (p.n, p.m as f64)).collect();
            fit_exponent(&pts, cfg.fit_window).ok().map(|f| f.a)
        })
        .collect();
    let realization_fits = RealizationFits {
        fitted: per_series.len(),
        failed: sweeps.len() - per_series.len(),
        mean_a: (!per_series.is_empty()).then(|| mean(&per_series)),
        std_a: (per_series.len() > 1).then(|| sample_std(&per_series)),
    };

    let cells_per_series: u64 = cfg.ns.iter().map(|&n| (n * n) as u64).sum();
    let telemetry = Telemetry {
        series: series.len(),
        cells: cells_per_series * series.len() as u64,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };

    Ok(ExperimentReport {
        config: cfg.clone(),
        generator,
        calibration,
        sweeps,
        mean_m,
        fit,
        fit_error,
        realization_fits,
        telemetry,
        landscapes,
    })
}

/// Writes `report.json`, `sweeps.csv`, `mvsn.csv` and (when the fit
/// succeeded) `fit.json` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        write_file(
            dir.join("report.json"),
            serde_json::to_string_pretty(report)? + "\n",
        )?,
        write_file(dir.join("sweeps.csv"), report.sweeps_csv())?,
        write_file(dir.join("mvsn.csv"), report.mvsn_csv())?,
    ];
    if let Some(fit) = report.fit_report() {
        files.push(write_file(
            dir.join("fit.json"),
            serde_json::to_string_pretty(&fit)? + "\n",
        )?);
    }
    Ok(files)
}

fn write_file(path: PathBuf, contents: String) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Profit matrix per saved resolution.
    Landscape,
    /// Ensemble mean `M` against `N`.
    MvsN,
    /// Fitted exponent against the swept parameter.
    AVsParam,
}

/// Plot-ready CSV files for `reports` in `dir`:
/// `<label>.landscape.N<n>.csv`, `<label>.mvsn.csv` or `a_vs_param.csv`.
pub fn emit_plot_data(
    reports: &[ExperimentReport],
    kind: PlotKind,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::MissingData("no reports to plot".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match kind {
        PlotKind::Landscape => {
            let mut files = Vec::new();
            for r in reports {
                if r.landscapes.is_empty() {
                    return Err(Error::MissingData(format!(
                        "experiment '{}' kept no landscapes (set save_landscapes)",
                        r.config.label
                    )));
                }
                for g in &r.landscapes {
                    let name = format!("{}.landscape.N{}.csv", r.config.label, g.n());
                    files.push(write_file(dir.join(name), g.to_csv())?);
                }
            }
            Ok(files)
        }
        PlotKind::MvsN => reports
            .iter()
            .map(|r| {
                write_file(
                    dir.join(format!("{}.mvsn.csv", r.config.label)),
                    r.mvsn_csv(),
                )
            })
            .collect(),
        PlotKind::AVsParam => {
            let mut out = String::from("param,a,stderr,realization_std\n");
            for r in reports {
                let param = r.config.param.ok_or_else(|| {
                    Error::MissingData(format!(
                        "experiment '{}' has no param value",
                        r.config.label
                    ))
                })?;
                let fit = r.fit.as_ref().ok_or_else(|| {
                    Error::MissingData(format!(
                        "experiment '{}' has no exponent: {}",
                        r.config.label,
                        r.fit_error.as_deref().unwrap_or("no fit")
                    ))
                })?;
                let spread = r
                    .realization_fits
                    .std_a
                    .map(|s| s.to_string())
                    .unwrap_or_default();
                writeln!(out, "{param},{},{},{spread}", fit.a, fit.stderr_a)
                    .expect("write to string");
            }
            Ok(vec![write_file(dir.join("a_vs_param.csv"), out)?])
        }
    }
}

/// Loads a two-column `N,M` table written by a sweep.
pub fn parse_mvsn_csv(text: &str) -> Result<Vec<(usize, f64)>> {
    let bad = |line: usize, msg: String| Error::Parse {
        path: "<sweep>".into(),
        line,
        msg,
    };
    let mut rows = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().eq_ignore_ascii_case("N,M") => {}
        Some((i, h)) => return Err(bad(i + 1, format!("expected header N,M, got '{h}'"))),
        None => return Err(bad(1, "empty file".into())),
    }
    for (i, line) in lines {
        let (n, m) = line
            .split_once(',')
            .ok_or_else(|| bad(i + 1, format!("expected 2 fields in '{line}'")))?;
        let n = n
            .trim()
            .parse()
            .map_err(|_| bad(i + 1, format!("bad N '{n}'")))?;
        let m = m
            .trim()
            .parse()
            .map_err(|_| bad(i + 1, format!("bad M '{m}'")))?;
        rows.push((n, m));
    }
    Ok(rows)
}
