//! Profit-landscape fractality.
//!
//! A two-threshold trading rule is backtested over a grid of `(p, q)`
//! thresholds; the number `M` of strict local maxima of the resulting
//! profit landscape grows with the grid resolution as `M ~ N^a`. This crate
//! generates or loads price series, builds the landscapes, counts maxima
//! and fits the exponent `a`.

pub mod backtest;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod landscape;
pub mod rng;
pub mod scaling;
pub mod series;
pub mod stats;

pub use backtest::{
    profit_at, run_strategy, ProfitResult, SignalIndex, StrategyKind, StrategyParams,
};
pub use error::{Error, Result};
pub use experiment::{
    emit_plot_data, run_experiment, write_report, ConfigFile, ExperimentConfig, ExperimentReport,
    PlotKind, Source,
};
pub use generators::{Generator, GeneratorConfig, ModelConfig};
pub use landscape::{
    build_landscape, count_local_maxima, ensemble_mean_m, sweep_resolutions, Averaging,
    Neighborhood, ProfitGrid, SweepPoint, SweepResult, DEFAULT_NS,
};
pub use rng::Seed;
pub use scaling::{
    compare_exponents, fit_exponent, ExponentTable, FitReport, FitWindow, ScalingFit,
};
pub use series::{load_prices, DriftVol, PriceSeries, ReturnSeries};
