//! `pfract`: generate price series, backtest threshold strategies, build
//! profit landscapes and fit their local-maxima scaling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pfract_core::experiment::parse_mvsn_csv;
use pfract_core::series::{estimate_pooled_drift_vol, write_price_csv};
use pfract_core::{
    build_landscape, compare_exponents, emit_plot_data, fit_exponent, load_prices, run_experiment,
    run_strategy, write_report, Averaging, ConfigFile, DriftVol, Error, ExperimentConfig,
    ExperimentReport, FitReport, FitWindow, GeneratorConfig, Neighborhood, PlotKind, PriceSeries,
    Result, Seed, StrategyKind, StrategyParams, DEFAULT_NS,
};

const INITIAL_CASH: f64 = pfract_core::backtest::DEFAULT_INITIAL_CASH;

#[derive(Parser)]
#[command(
    name = "pfract",
    version,
    about = "Profit-landscape fractality experiments"
)]
struct Cli {
    /// JSON config: experiments for `run`, a generator for `generate`,
    /// a strategy template for `backtest`, `landscape` and `sweep`.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides `master_seed` in `run` configs).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "K")]
    jobs: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic price series.
    Generate(GenerateArgs),
    /// Profit of one (p, q) pair on one series.
    Backtest(BacktestArgs),
    /// Profit landscape at one resolution.
    Landscape(LandscapeArgs),
    /// Local-maxima counts against resolution.
    Sweep(SweepArgs),
    /// Scaling exponent from an `N,M` table.
    Fit(FitArgs),
    /// Full experiments from `--config`.
    Run,
    /// Write series with their daily returns shuffled in time.
    Shuffle(ShuffleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Gbm,
    Fbm,
    Levy,
    Msm,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    m0: Option<f64>,
    /// Series length in days.
    #[arg(long)]
    len: Option<usize>,
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    /// Price files used to calibrate drift and volatility.
    #[arg(long, value_name = "PATH")]
    calibration: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    S1,
    S2,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value_t = Kind::S1)]
    kind: Kind,
    /// Lag in days.
    #[arg(short, long, default_value_t = 1)]
    d: usize,
    /// Cash fraction per buy.
    #[arg(long, default_value_t = 0.5)]
    fb: f64,
    /// Share fraction per sell.
    #[arg(long, default_value_t = 0.5)]
    fs: f64,
    #[arg(long, default_value_t = pfract_core::backtest::DEFAULT_FEE)]
    fee: f64,
}

#[derive(Args)]
struct BacktestArgs {
    /// Price CSV (`DATE,CLOSE`).
    #[arg(long)]
    input: PathBuf,
    #[arg(short, long)]
    p: f64,
    #[arg(short, long)]
    q: f64,
    #[command(flatten)]
    strategy: StrategyArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Nb {
    VonNeumann,
    Moore,
}

impl From<Nb> for Neighborhood {
    fn from(nb: Nb) -> Self {
        match nb {
            Nb::VonNeumann => Neighborhood::VonNeumann,
            Nb::Moore => Neighborhood::Moore,
        }
    }
}

#[derive(Args)]
struct LandscapeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Cells per side.
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    domain_scale: f64,
    #[arg(long, value_enum, default_value_t = Nb::VonNeumann)]
    neighborhood: Nb,
    #[command(flatten)]
    strategy: StrategyArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Avg {
    Arithmetic,
    Geometric,
}

#[derive(Args)]
struct SweepArgs {
    /// Price CSV or directory of them.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_NS)]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    domain_scale: f64,
    #[arg(long, value_enum, default_value_t = Nb::VonNeumann)]
    neighborhood: Nb,
    #[arg(long, value_enum, default_value_t = Avg::Arithmetic)]
    averaging: Avg,
    #[command(flatten)]
    strategy: StrategyArgs,
}

#[derive(Args)]
struct FitArgs {
    /// `N,M` CSV as written by `sweep`.
    #[arg(long)]
    input: PathBuf,
    /// Fit only the largest K resolutions.
    #[arg(long, value_name = "K", conflicts_with_all = ["all", "min_n"])]
    largest: Option<usize>,
    /// Fit every resolution.
    #[arg(long)]
    all: bool,
    #[arg(long, requires = "max_n", conflicts_with = "all")]
    min_n: Option<usize>,
    #[arg(long, requires = "min_n")]
    max_n: Option<usize>,
}

#[derive(Args)]
struct ShuffleArgs {
    /// Price CSV or directory of them.
    #[arg(long)]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Backtest(a) => backtest(cli, a),
        Command::Landscape(a) => landscape(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Run => run(cli),
        Command::Shuffle(a) => shuffle(cli, a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
}

fn write_out(path: PathBuf, contents: String) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn out_dir(cli: &Cli, cmd: &str) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .ok_or_else(|| Error::Config(format!("`{cmd}` needs --out DIR")))?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn strategy(cli: &Cli, a: &StrategyArgs) -> Result<StrategyParams> {
    let sp = match &cli.config {
        Some(path) => read_json(path)?,
        None => StrategyParams::new(match a.kind {
            Kind::S1 => StrategyKind::S1,
            Kind::S2 => StrategyKind::S2,
        })
        .with_lag(a.d)
        .with_fractions(a.fb, a.fs)
        .with_fee(a.fee),
    };
    sp.validate()?;
    Ok(sp)
}

fn load_one(path: &Path) -> Result<PriceSeries> {
    let mut all = load_prices(path)?;
    if all.len() != 1 {
        return Err(Error::Config(format!(
            "{} holds {} series, expected one file",
            path.display(),
            all.len()
        )));
    }
    Ok(all.remove(0))
}

fn write_series(series: &PriceSeries, dir: &Path, suffix: &str, format: Format) -> Result<()> {
    match format {
        Format::Csv => write_price_csv(series, dir.join(format!("{}{suffix}.csv", series.label()))),
        Format::Json => write_out(
            dir.join(format!("{}{suffix}.json", series.label())),
            serde_json::to_string(&json!({"label": series.label(), "close": series.values()}))?
                + "\n",
        ),
    }
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let mut gc: GeneratorConfig = match (&cli.config, a.model) {
        (Some(path), _) => read_json(path)?,
        (None, Some(model)) => {
            let need = |v: Option<f64>, flag: &str| {
                v.ok_or_else(|| Error::Config(format!("this model needs --{flag}")))
            };
            match model {
                Model::Gbm => GeneratorConfig::gbm(),
                Model::Fbm => GeneratorConfig::fbm(need(a.hurst, "hurst")?),
                Model::Levy => GeneratorConfig::levy(need(a.alpha, "alpha")?),
                Model::Msm => GeneratorConfig::msm(need(a.m0, "m0")?),
            }
        }
        (None, None) => return Err(Error::Config("`generate` needs --model or --config".into())),
    };
    if let Some(len) = a.len {
        gc = gc.with_len(len);
    }
    if a.realizations == 0 {
        return Err(Error::Config("realizations must be >= 1".into()));
    }
    let calib = match &a.calibration {
        Some(path) => estimate_pooled_drift_vol(&load_prices(path)?)?,
        None => DriftVol::DEFAULT,
    };
    let g = gc.resolve(calib)?;
    let dir = out_dir(cli, "generate")?;
    let master = cli.seed.unwrap_or(0);
    for k in 0..a.realizations as u64 {
        write_series(&g.generate(Seed::new(master, k))?, &dir, "", cli.format)?;
    }
    Ok(())
}

fn backtest(cli: &Cli, a: &BacktestArgs) -> Result<()> {
    let series = load_one(&a.input)?;
    let sp = strategy(cli, &a.strategy)?.with_thresholds(a.p, a.q);
    let r = run_strategy(&series, &sp, INITIAL_CASH)?;
    match cli.format {
        Format::Csv => {
            println!("pi,final_cash,final_shares,trade_count");
            println!(
                "{},{},{},{}",
                r.pi, r.final_cash, r.final_shares, r.trade_count
            );
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(&r)?),
    }
    Ok(())
}

fn landscape(cli: &Cli, a: &LandscapeArgs) -> Result<()> {
    let series = load_one(&a.input)?;
    let sp = strategy(cli, &a.strategy)?;
    let grid = build_landscape(&series, &sp, a.n, a.domain_scale)?;
    let m = grid.count_local_maxima(a.neighborhood.into());
    let (ext, text) = match cli.format {
        Format::Csv => ("csv", grid.to_csv()),
        Format::Json => (
            "json",
            serde_json::to_string(&json!({
                "label": series.label(),
                "n": grid.n(),
                "domain_scale": grid.domain_scale(),
                "local_maxima": m,
                "values": grid.values().chunks(grid.n()).collect::<Vec<_>>(),
            }))? + "\n",
        ),
    };
    match &cli.out {
        Some(_) => {
            let dir = out_dir(cli, "landscape")?;
            write_out(
                dir.join(format!("{}.landscape.N{}.{ext}", series.label(), a.n)),
                text,
            )?;
            println!("{m}");
        }
        None => {
            print!("{text}");
            eprintln!("local maxima: {m}");
        }
    }
    Ok(())
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let label = a
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .unwrap_or("sweep")
        .to_owned();
    let mut cfg = ExperimentConfig::from_data(label, &a.input);
    cfg.strategy = strategy(cli, &a.strategy)?;
    cfg.ns = a.ns.clone();
    cfg.domain_scale = a.domain_scale;
    cfg.neighborhood = a.neighborhood.into();
    cfg.averaging = match a.averaging {
        Avg::Arithmetic => Averaging::Arithmetic,
        Avg::Geometric => Averaging::Geometric,
    };
    let report = run_experiment(&cfg, cli.jobs)?;
    let (name, text) = match cli.format {
        Format::Csv => ("mvsn.csv", report.mvsn_csv()),
        Format::Json => (
            "sweep.json",
            serde_json::to_string_pretty(&json!({
                "sweeps": report.sweeps,
                "mean_m": report.mean_m,
            }))? + "\n",
        ),
    };
    match &cli.out {
        Some(_) => write_out(out_dir(cli, "sweep")?.join(name), text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let points = parse_mvsn_csv(&text)?;
    let window = match (a.largest, a.all, a.min_n, a.max_n) {
        (Some(count), ..) => FitWindow::Largest { count },
        (_, true, ..) => FitWindow::All,
        (_, _, Some(min_n), Some(max_n)) => FitWindow::Range { min_n, max_n },
        _ => FitWindow::LargestHalf,
    };
    let f = fit_exponent(&points, window)?;
    match cli.format {
        Format::Csv => {
            println!("a,stderr,r_squared,points");
            println!("{},{},{},{}", f.a, f.stderr_a, f.r_squared, f.fit_ns.len());
        }
        Format::Json => {
            let label = a
                .input
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("fit");
            println!(
                "{}",
                serde_json::to_string_pretty(&FitReport::new(label, &f, &points))?
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("`run` needs --config PATH".into()))?;
    let mut cfgs = ConfigFile::load(path)?;
    for cfg in &mut cfgs {
        if let Some(seed) = cli.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.output_dir = Some(out.clone());
        }
    }
    let mut labels: Vec<&str> = cfgs.iter().map(|c| c.label.as_str()).collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!(
            "duplicate experiment label '{}'",
            w[0]
        )));
    }

    let root = cfgs[0]
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results"));
    let mut reports: Vec<ExperimentReport> = Vec::with_capacity(cfgs.len());
    for cfg in &cfgs {
        let report = run_experiment(cfg, cli.jobs)?;
        let base = cfg.output_dir.clone().unwrap_or_else(|| root.clone());
        let dir = base.join(&cfg.label);
        write_report(&report, &dir)?;
        if !report.landscapes.is_empty() {
            emit_plot_data(std::slice::from_ref(&report), PlotKind::Landscape, &dir)?;
        }
        match (&report.fit, &report.fit_error) {
            (Some(f), _) => println!("{}: a = {:.4} ± {:.4}", cfg.label, f.a, f.stderr_a),
            (None, err) => println!("{}: no fit ({})", cfg.label, err.as_deref().unwrap_or("")),
        }
        reports.push(report);
    }

    if reports
        .iter()
        .all(|r| r.config.param.is_some() && r.fit.is_some())
    {
        emit_plot_data(&reports, PlotKind::AVsParam, &root)?;
    }
    let fits: Vec<_> = reports
        .iter()
        .filter_map(|r| r.fit.clone().map(|f| (r.config.label.clone(), f)))
        .collect();
    if !fits.is_empty() {
        let table = compare_exponents(&fits)?;
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        write_out(root.join("exponents.csv"), table.to_csv())?;
    }
    Ok(())
}

fn shuffle(cli: &Cli, a: &ShuffleArgs) -> Result<()> {
    let series = load_prices(&a.input)?;
    let dir = out_dir(cli, "shuffle")?;
    let master = cli.seed.unwrap_or(0);
    for (k, s) in series.iter().enumerate() {
        let shuffled = s.shuffle_returns(Seed::new(master, k as u64))?;
        write_series(&shuffled, &dir, ".shuffled", cli.format)?;
    }
    Ok(())
}
