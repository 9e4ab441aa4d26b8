//! Two-threshold trading strategies on a single price series.
//!
//! At every day `t >= d` the lag-`d` log-return `R = ln(S[t] / S[t-d])` is
//! compared with the thresholds. Strategy [`StrategyKind::S1`] sells a
//! fraction `f_s` of the held shares when `R > p` and spends a fraction
//! `f_b` of the cash when `R < -q`; [`StrategyKind::S2`] swaps the two
//! actions. Buyers pay the commission on top of the price, sellers receive
//! the price net of commission. The final position is marked to market at
//! the last close.
//!
//! Only days whose return crosses a threshold change the portfolio, so
//! [`SignalIndex`] sorts the returns once and evaluates each `(p, q)` by
//! visiting just the crossing days.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::PriceSeries;

/// Initial cash of every backtest.
pub const DEFAULT_INITIAL_CASH: f64 = 1e9;
pub const DEFAULT_FEE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Sell on rises above `p`, buy on drops below `-q`.
    S1,
    /// Buy on rises above `p`, sell on drops below `-q`.
    S2,
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::S1 => "S1",
            StrategyKind::S2 => "S2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub kind: StrategyKind,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default = "default_lag")]
    pub d: usize,
    #[serde(default = "default_fraction")]
    pub f_b: f64,
    #[serde(default = "default_fraction")]
    pub f_s: f64,
    #[serde(default = "default_fee")]
    pub fee: f64,
}

fn default_lag() -> usize {
    1
}

fn default_fraction() -> f64 {
    0.5
}

fn default_fee() -> f64 {
    DEFAULT_FEE
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self::new(StrategyKind::S1)
    }
}

impl StrategyParams {
    /// `d = 1`, `f_b = f_s = 0.5`, 0.1% commission, zero thresholds.
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            p: 0.0,
            q: 0.0,
            d: 1,
            f_b: 0.5,
            f_s: 0.5,
            fee: DEFAULT_FEE,
        }
    }

    pub fn with_thresholds(self, p: f64, q: f64) -> Self {
        Self { p, q, ..self }
    }

    pub fn with_lag(self, d: usize) -> Self {
        Self { d, ..self }
    }

    pub fn with_fractions(self, f_b: f64, f_s: f64) -> Self {
        Self { f_b, f_s, ..self }
    }

    pub fn with_fee(self, fee: f64) -> Self {
        Self { fee, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.f_b) || !unit(self.f_s) {
            return Err(Error::Config(format!(
                "fractions must lie in [0, 1], got f_b={} f_s={}",
                self.f_b, self.f_s
            )));
        }
        if !(self.p >= 0.0 && self.q >= 0.0 && self.fee >= 0.0 && self.fee.is_finite()) {
            return Err(Error::Config(format!(
                "thresholds and fee must be >= 0, got p={} q={} fee={}",
                self.p, self.q, self.fee
            )));
        }
        if self.d == 0 {
            return Err(Error::Config("lag d must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitResult {
    /// `(m(T) + n(T)·S(T) - m(1)) / m(1)`.
    pub pi: f64,
    pub final_cash: f64,
    pub final_shares: f64,
    pub trade_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Buy,
    Sell,
}

/// One executed trade with the portfolio before and after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub day: usize,
    pub action: Action,
    pub price: f64,
    pub cash_before: f64,
    pub shares_before: f64,
    pub cash_after: f64,
    pub shares_after: f64,
}

/// Lag-`d` returns of one series, sorted for threshold queries.
#[derive(Debug, Clone)]
pub struct SignalIndex<'a> {
    prices: &'a [f64],
    lag: usize,
    /// Days ordered by decreasing return, with their returns.
    rising_days: Vec<u32>,
    rising_returns: Vec<f64>,
    /// Days ordered by increasing return, with their returns.
    falling_days: Vec<u32>,
    falling_returns: Vec<f64>,
}

impl<'a> SignalIndex<'a> {
    pub fn new(series: &'a PriceSeries, lag: usize) -> Result<Self> {
        let prices = series.values();
        if lag == 0 || lag >= prices.len() {
            return Err(Error::Config(format!(
                "lag {lag} needs a series longer than {lag} days, '{}' has {}",
                series.label(),
                prices.len()
            )));
        }
        let returns: Vec<(u32, f64)> = (lag..prices.len())
            .map(|t| (t as u32, (prices[t] / prices[t - lag]).ln()))
            .collect();

        let mut falling = returns.clone();
        falling.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut rising = returns;
        rising.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let (rising_days, rising_returns) = rising.into_iter().unzip();
        let (falling_days, falling_returns) = falling.into_iter().unzip();
        Ok(Self {
            prices,
            lag,
            rising_days,
            rising_returns,
            falling_days,
            falling_returns,
        })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Largest absolute lag-`d` return.
    pub fn max_abs_return(&self) -> f64 {
        let up = self.rising_returns.first().copied().unwrap_or(0.0);
        let down = self.falling_returns.first().copied().unwrap_or(0.0);
        up.abs().max(down.abs())
    }

    /// Number of days with `R > p` and with `R < -q`.
    fn crossings(&self, p: f64, q: f64) -> (usize, usize) {
        let above = self.rising_returns.partition_point(|&r| r > p);
        let below = self.falling_returns.partition_point(|&r| r < -q);
        (above, below)
    }

    /// Runs the strategy; `scratch` is reused between calls.
    pub fn evaluate(&self, sp: &StrategyParams, m1: f64, scratch: &mut Vec<u32>) -> ProfitResult {
        self.simulate(sp, m1, scratch, |_| {})
    }

    /// Runs the strategy and records every executed trade.
    pub fn trace(&self, sp: &StrategyParams, m1: f64) -> (ProfitResult, Vec<Trade>) {
        let mut trades = Vec::new();
        let result = self.simulate(sp, m1, &mut Vec::new(), |t| trades.push(*t));
        (result, trades)
    }

    fn simulate(
        &self,
        sp: &StrategyParams,
        m1: f64,
        events: &mut Vec<u32>,
        mut on_trade: impl FnMut(&Trade),
    ) -> ProfitResult {
        debug_assert_eq!(sp.d, self.lag);
        let (above, below) = self.crossings(sp.p, sp.q);
        let (buys, sells) = match sp.kind {
            StrategyKind::S1 => (&self.falling_days[..below], &self.rising_days[..above]),
            StrategyKind::S2 => (&self.rising_days[..above], &self.falling_days[..below]),
        };
        let idle = ProfitResult {
            pi: 0.0,
            final_cash: m1,
            final_shares: 0.0,
            trade_count: 0,
        };
        if buys.is_empty() || sp.f_b == 0.0 {
            return idle;
        }

        // day << 1 | is_buy, processed in time order
        events.clear();
        events.extend(buys.iter().map(|d| d << 1 | 1));
        events.extend(sells.iter().map(|d| d << 1));
        events.sort_unstable();

        let mut cash = m1;
        let mut shares = 0.0;
        let mut trade_count = 0;
        for &e in events.iter() {
            let day = (e >> 1) as usize;
            let price = self.prices[day];
            let (cash_before, shares_before) = (cash, shares);
            let action = if e & 1 == 1 {
                let spend = sp.f_b * cash;
                if spend == 0.0 {
                    continue;
                }
                shares += spend / (price * (1.0 + sp.fee));
                cash -= spend;
                Action::Buy
            } else {
                let sold = sp.f_s * shares;
                if sold == 0.0 {
                    continue;
                }
                cash += sold * price * (1.0 - sp.fee);
                shares -= sold;
                Action::Sell
            };
            trade_count += 1;
            on_trade(&Trade {
                day,
                action,
                price,
                cash_before,
                shares_before,
                cash_after: cash,
                shares_after: shares,
            });
        }
        let last = self.prices[self.prices.len() - 1];
        ProfitResult {
            pi: (cash + shares * last - m1) / m1,
            final_cash: cash,
            final_shares: shares,
            trade_count,
        }
    }
}

fn check_inputs(series: &PriceSeries, sp: &StrategyParams, m1: f64) -> Result<()> {
    sp.validate()?;
    if !(m1 > 0.0 && m1.is_finite()) {
        return Err(Error::Config(format!("initial cash {m1} must be > 0")));
    }
    if sp.d >= series.len() {
        return Err(Error::Config(format!(
            "lag {} must be shorter than series '{}' ({} days)",
            sp.d,
            series.label(),
            series.len()
        )));
    }
    Ok(())
}

/// Backtests `sp` on `series` starting from `m1` in cash and no shares.
pub fn run_strategy(series: &PriceSeries, sp: &StrategyParams, m1: f64) -> Result<ProfitResult> {
    check_inputs(series, sp, m1)?;
    let index = SignalIndex::new(series, sp.d)?;
    Ok(index.evaluate(sp, m1, &mut Vec::new()))
}

/// Normalized profit of `template` with thresholds `(p, q)`.
pub fn profit_at(series: &PriceSeries, template: &StrategyParams, p: f64, q: f64) -> Result<f64> {
    Ok(run_strategy(
        series,
        &template.with_thresholds(p, q),
        DEFAULT_INITIAL_CASH,
    )?
    .pi)
}
