//! Profit landscapes over the `(p, q)` threshold square and their local
//! maxima.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{SignalIndex, StrategyParams, DEFAULT_INITIAL_CASH};
use crate::error::{Error, Result};
use crate::series::PriceSeries;

/// Resolution ladder used when none is configured.
pub const DEFAULT_NS: [usize; 6] = [8, 16, 32, 64, 128, 256];

/// `N × N` profits at cell centres `p_i = scale·(i + ½)/N`,
/// `q_j = scale·(j + ½)/N` (zero-based `i`, `j`), stored row-major by `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitGrid {
    n: usize,
    domain_scale: f64,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// The four orthogonal neighbours.
    #[default]
    VonNeumann,
    /// All eight surrounding cells.
    Moore,
}

impl Neighborhood {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::VonNeumann => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Neighborhood::Moore => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

impl ProfitGrid {
    pub fn from_values(n: usize, domain_scale: f64, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("grid resolution {n} must be >= 2")));
        }
        if values.len() != n * n {
            return Err(Error::Validation(format!(
                "grid of resolution {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v < -1.0) {
            return Err(Error::Validation(format!("profit {v} below -1")));
        }
        Ok(Self {
            n,
            domain_scale,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_scale(&self) -> f64 {
        self.domain_scale
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Threshold at the centre of cell `i` along either axis.
    pub fn center(&self, i: usize) -> f64 {
        cell_center(self.domain_scale, self.n, i)
    }

    pub fn count_local_maxima(&self, nb: Neighborhood) -> usize {
        count_local_maxima(&self.values, self.n, nb)
    }

    /// First line `N`, then `N` comma-separated rows (row `i` is `p_i`).
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for row in self.values.chunks(self.n) {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, domain_scale: f64) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: "<grid>".into(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (_, head) = lines.next().ok_or_else(|| bad(1, "empty grid".into()))?;
        let n: usize = head
            .parse()
            .map_err(|_| bad(1, format!("bad resolution '{head}'")))?;
        let mut values = Vec::with_capacity(n * n);
        for (i, line) in lines {
            for field in line.split(',') {
                values.push(
                    field
                        .trim()
                        .parse()
                        .map_err(|_| bad(i + 1, format!("bad value '{field}'")))?,
                );
            }
        }
        Self::from_values(n, domain_scale, values)
    }
}

fn cell_center(scale: f64, n: usize, i: usize) -> f64 {
    scale * (i as f64 + 0.5) / n as f64
}

/// Cells strictly greater than every in-grid neighbour. Edge and corner
/// cells compare only with the neighbours that exist.
pub fn count_local_maxima(values: &[f64], n: usize, nb: Neighborhood) -> usize {
    let offsets = nb.offsets();
    let n_i = n as isize;
    let mut count = 0;
    for i in 0..n_i {
        for j in 0..n_i {
            let v = values[(i * n_i + j) as usize];
            let is_max = offsets.iter().all(|&(di, dj)| {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= n_i || b >= n_i {
                    return true;
                }
                v > values[(a * n_i + b) as usize]
            });
            if is_max {
                count += 1;
            }
        }
    }
    count
}

/// Evaluates the profit of `template` at every cell centre of an `n × n`
/// grid over `[0, domain_scale]²`.
pub fn build_landscape(
    series: &PriceSeries,
    template: &StrategyParams,
    n: usize,
    domain_scale: f64,
) -> Result<ProfitGrid> {
    let index = landscape_index(series, template, domain_scale)?;
    landscape_from_index(&index, template, n, domain_scale)
}

fn landscape_index<'a>(
    series: &'a PriceSeries,
    template: &StrategyParams,
    domain_scale: f64,
) -> Result<SignalIndex<'a>> {
    template.with_thresholds(0.0, 0.0).validate()?;
    if !(domain_scale > 0.0 && domain_scale.is_finite()) {
        return Err(Error::Config(format!(
            "domain scale {domain_scale} must be > 0"
        )));
    }
    if template.d >= series.len() {
        return Err(Error::Config(format!(
            "lag {} must be shorter than series '{}' ({} days)",
            template.d,
            series.label(),
            series.len()
        )));
    }
    SignalIndex::new(series, template.d)
}

fn landscape_from_index(
    index: &SignalIndex<'_>,
    template: &StrategyParams,
    n: usize,
    domain_scale: f64,
) -> Result<ProfitGrid> {
    if n < 2 {
        return Err(Error::Config(format!("grid resolution {n} must be >= 2")));
    }
    let mut values = vec![0.0; n * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each_init(Vec::new, |scratch, (i, row)| {
            let p = cell_center(domain_scale, n, i);
            for (j, cell) in row.iter_mut().enumerate() {
                let sp = template.with_thresholds(p, cell_center(domain_scale, n, j));
                *cell = index.evaluate(&sp, DEFAULT_INITIAL_CASH, scratch).pi;
            }
        });
    ProfitGrid::from_values(n, domain_scale, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
}

/// Local-maxima counts of one series across resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub label: String,
    pub strategy: StrategyParams,
    pub neighborhood: Neighborhood,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn ns(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    /// Two-column `N,M` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,M\n");
        for p in &self.points {
            writeln!(out, "{},{}", p.n, p.m).expect("write to string");
        }
        out
    }
}

pub(crate) fn check_ladder(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Config("resolution list is empty".into()));
    }
    if ns[0] < 2 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "resolutions must be >= 2 and strictly increasing, got {ns:?}"
        )));
    }
    Ok(())
}

/// Builds a landscape at each resolution and counts its maxima.
pub fn sweep_resolutions(
    series: &PriceSeries,
    template: &StrategyParams,
    ns: &[usize],
    nb: Neighborhood,
    domain_scale: f64,
) -> Result<SweepResult> {
    check_ladder(ns)?;
    let index = landscape_index(series, template, domain_scale)?;
    let mut sweep = sweep_with(ns, nb, |n| {
        landscape_from_index(&index, template, n, domain_scale)
    })?;
    sweep.label = series.label().to_string();
    sweep.strategy = *template;
    Ok(sweep)
}

/// Sweep over grids produced by `grid_at(N)`; the landscape-free core of
/// [`sweep_resolutions`].
pub fn sweep_with(
    ns: &[usize],
    nb: Neighborhood,
    mut grid_at: impl FnMut(usize) -> Result<ProfitGrid>,
) -> Result<SweepResult> {
    check_ladder(ns)?;
    let points = ns
        .iter()
        .map(|&n| {
            let grid = grid_at(n)?;
            Ok(SweepPoint {
                n,
                m: grid.count_local_maxima(nb),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        label: String::new(),
        strategy: StrategyParams::default(),
        neighborhood: nb,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Arithmetic,
    Geometric,
}

/// Mean `M` at each resolution across sweeps, summed in input order.
pub fn ensemble_mean_m(sweeps: &[SweepResult], averaging: Averaging) -> Result<Vec<(usize, f64)>> {
    let first = sweeps
        .first()
        .ok_or_else(|| Error::Config("no sweeps to average".into()))?;
    let ns = first.ns();
    if let Some(s) = sweeps.iter().find(|s| s.ns() != ns) {
        return Err(Error::Config(format!(
            "sweep '{}' has resolutions {:?}, expected {ns:?}",
            s.label,
            s.ns()
        )));
    }
    let count = sweeps.len() as f64;
    Ok(ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mean = match averaging {
                Averaging::Arithmetic => {
                    sweeps.iter().map(|s| s.points[k].m as f64).sum::<f64>() / count
                }
                Averaging::Geometric => (sweeps
                    .iter()
                    .map(|s| (s.points[k].m as f64).ln())
                    .sum::<f64>()
                    / count)
                    .exp(),
            };
            (n, mean)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::{profit_at, StrategyKind};
    use crate::rng::Seed;
    use crate::series::prices_from_returns;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid(n: usize, v: Vec<f64>) -> ProfitGrid {
        ProfitGrid::from_values(n, 1.0, v).unwrap()
    }

    /// Compares each cell with all cells at Chebyshev (Moore) or Manhattan
    /// (von Neumann) distance one.
    fn exhaustive_count(g: &ProfitGrid, nb: Neighborhood) -> usize {
        let n = g.n() as i64;
        let mut count = 0;
        for a in 0..n {
            for b in 0..n {
                let mut strict = true;
                for c in 0..n {
                    for d in 0..n {
                        let (da, db) = ((a - c).abs(), (b - d).abs());
                        let adjacent = match nb {
                            Neighborhood::VonNeumann => da + db == 1,
                            Neighborhood::Moore => da.max(db) == 1,
                        };
                        if adjacent
                            && g.get(a as usize, b as usize) <= g.get(c as usize, d as usize)
                        {
                            strict = false;
                        }
                    }
                }
                count += strict as usize;
            }
        }
        count
    }

    fn random_grid(n: usize, rng: &mut impl Rng) -> ProfitGrid {
        grid(n, (0..n * n).map(|_| rng.gen::<f64>()).collect())
    }

    #[test]
    fn maxima_examples() {
        assert_eq!(
            grid(3, vec![0.5; 9]).count_local_maxima(Neighborhood::VonNeumann),
            0
        );
        let mut center = vec![0.0; 9];
        center[4] = 1.0;
        let g = grid(3, center);
        assert_eq!(g.count_local_maxima(Neighborhood::VonNeumann), 1);
        assert_eq!(g.count_local_maxima(Neighborhood::Moore), 1);

        let diag = grid(2, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(diag.count_local_maxima(Neighborhood::VonNeumann), 2);
        assert_eq!(diag.count_local_maxima(Neighborhood::Moore), 0);
    }

    #[test]
    fn maxima_match_exhaustive_scan() {
        let mut rng = Seed::new(4, 0).rng();
        for _ in 0..100 {
            let g = random_grid(20, &mut rng);
            for nb in [Neighborhood::VonNeumann, Neighborhood::Moore] {
                assert_eq!(g.count_local_maxima(nb), exhaustive_count(&g, nb));
            }
        }
    }

    #[test]
    fn iid_grid_maxima_density() {
        // each interior cell is the largest of five exchangeable values
        let mut rng = Seed::new(5, 0).rng();
        let ns = [64];
        let trials = 200;
        let total: usize = (0..trials)
            .map(|_| {
                sweep_with(&ns, Neighborhood::VonNeumann, |n| {
                    Ok(random_grid(n, &mut rng))
                })
                .unwrap()
                .points[0]
                    .m
            })
            .sum();
        let density = total as f64 / (trials * 64 * 64) as f64;
        assert!((density - 0.2).abs() < 0.01, "density={density}");
    }

    #[test]
    fn small_landscape_by_hand() {
        let s = PriceSeries::new(vec![100.0, 80.0, 100.0], "x").unwrap();
        let t = StrategyParams::new(StrategyKind::S1)
            .with_fractions(1.0, 1.0)
            .with_fee(0.0);
        let g = build_landscape(&s, &t, 2, 1.0).unwrap();
        assert_eq!(g.center(0), 0.25);
        assert_eq!(g.center(1), 0.75);
        assert_eq!(g.values(), &[0.0; 4]);
    }

    #[test]
    fn quiet_series_gives_flat_landscape() {
        let n = 16;
        let steps: Vec<f64> = (0..200)
            .map(|k| if k % 2 == 0 { 0.03 } else { -0.03 })
            .collect();
        let s = PriceSeries::new(prices_from_returns(10.0, &steps), "q").unwrap();
        let t = StrategyParams::new(StrategyKind::S1);
        let g = build_landscape(&s, &t, n, 1.0).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0));
        let sweep =
            sweep_resolutions(&s, &t, &[2, 4, 8, 16], Neighborhood::VonNeumann, 1.0).unwrap();
        assert!(sweep.points.iter().all(|p| p.m == 0));
    }

    fn random_walk(seed: u64, len: usize) -> PriceSeries {
        let mut rng = Seed::new(seed, 0).rng();
        let steps: Vec<f64> = (1..len).map(|_| 0.2 * (rng.gen::<f64>() - 0.5)).collect();
        PriceSeries::new(prices_from_returns(100.0, &steps), "rw").unwrap()
    }

    #[test]
    fn cells_match_profit_at() {
        let s = random_walk(1, 120);
        let t = StrategyParams::new(StrategyKind::S2).with_lag(3);
        let g = build_landscape(&s, &t, 8, 0.5).unwrap();
        for (i, j) in [(0, 0), (3, 5), (7, 1), (7, 7)] {
            let want = profit_at(&s, &t, g.center(i), g.center(j)).unwrap();
            assert_eq!(g.get(i, j), want);
        }
    }

    #[test]
    fn lag_changes_landscape() {
        let s = random_walk(2, 300);
        let t = StrategyParams::new(StrategyKind::S1);
        let a = build_landscape(&s, &t, 16, 0.2).unwrap();
        let b = build_landscape(&s, &t.with_lag(10), 16, 0.2).unwrap();
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn landscape_errors() {
        let s = random_walk(3, 10);
        let t = StrategyParams::new(StrategyKind::S1);
        assert!(build_landscape(&s, &t, 1, 1.0).is_err());
        assert!(build_landscape(&s, &t.with_lag(10), 4, 1.0).is_err());
        assert!(build_landscape(&s, &t, 4, 0.0).is_err());
        assert!(sweep_resolutions(&s, &t, &[8, 8], Neighborhood::Moore, 1.0).is_err());
        assert!(sweep_resolutions(&s, &t, &[], Neighborhood::Moore, 1.0).is_err());
    }

    #[test]
    fn ensemble_means() {
        let sweep = |ms: [usize; 2]| SweepResult {
            label: "x".into(),
            strategy: StrategyParams::default(),
            neighborhood: Neighborhood::VonNeumann,
            points: vec![
                SweepPoint { n: 8, m: ms[0] },
                SweepPoint { n: 16, m: ms[1] },
            ],
        };
        let one = ensemble_mean_m(&[sweep([4, 16])], Averaging::Arithmetic).unwrap();
        assert_eq!(one, vec![(8, 4.0), (16, 16.0)]);
        let two =
            ensemble_mean_m(&[sweep([4, 16]), sweep([6, 20])], Averaging::Arithmetic).unwrap();
        assert_eq!(two, vec![(8, 5.0), (16, 18.0)]);
        let geo = ensemble_mean_m(&[sweep([4, 16]), sweep([9, 4])], Averaging::Geometric).unwrap();
        assert!((geo[0].1 - 6.0).abs() < 1e-12 && (geo[1].1 - 8.0).abs() < 1e-12);

        let mut odd = sweep([1, 2]);
        odd.points[1].n = 32;
        assert!(ensemble_mean_m(&[sweep([1, 2]), odd], Averaging::Arithmetic).is_err());
        assert!(ensemble_mean_m(&[], Averaging::Arithmetic).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(2, vec![0.25, -0.5, 1e-17, 3.0]);
        assert_eq!(ProfitGrid::from_csv(&g.to_csv(), 1.0).unwrap(), g);
        assert!(ProfitGrid::from_csv("3\n1,2\n", 1.0).is_err());
        let sweep = SweepResult {
            label: "x".into(),
            strategy: StrategyParams::default(),
            neighborhood: Neighborhood::Moore,
            points: vec![SweepPoint { n: 8, m: 3 }],
        };
        assert_eq!(sweep.to_csv(), "N,M\n8,3\n");
    }

    fn transpose(g: &ProfitGrid) -> ProfitGrid {
        let n = g.n();
        grid(n, (0..n * n).map(|k| g.get(k % n, k / n)).collect())
    }

    fn rotate(g: &ProfitGrid) -> ProfitGrid {
        let n = g.n();
        grid(n, (0..n * n).map(|k| g.get(n - 1 - k % n, k / n)).collect())
    }

    proptest! {
        #[test]
        fn maxima_symmetries(n in 2usize..12, seed in any::<u64>(), shift in -0.5f64..5.0, scale in 0.1f64..10.0) {
            let mut rng = Seed::from(seed).rng();
            // coarse values so ties occur
            let g = grid(n, (0..n * n).map(|_| rng.gen_range(0..4) as f64 / 4.0).collect());
            for nb in [Neighborhood::VonNeumann, Neighborhood::Moore] {
                let m = g.count_local_maxima(nb);
                prop_assert_eq!(m, transpose(&g).count_local_maxima(nb));
                prop_assert_eq!(m, rotate(&g).count_local_maxima(nb));
                let affine = grid(n, g.values().iter().map(|v| v * scale + shift).collect());
                prop_assert_eq!(m, affine.count_local_maxima(nb));
                prop_assert_eq!(m, exhaustive_count(&g, nb));
            }
            prop_assert!(g.count_local_maxima(Neighborhood::VonNeumann) <= (n * n).div_ceil(2));
            prop_assert!(g.count_local_maxima(Neighborhood::Moore) <= n.div_ceil(2).pow(2));
        }
    }
}
