//! Small descriptive statistics used by the generator checks and reports.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor.
pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// `sum x[t]·x[t+lag] / n` for a process with known zero mean.
pub fn autocovariance_zero_mean(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

/// Sample autocorrelation at `lag` around the sample mean.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    autocovariance_zero_mean(&c, lag) / autocovariance_zero_mean(&c, 0)
}

pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Linear-interpolated quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Hill estimate of the tail index of `|x|` from its largest
/// `ceil(top_fraction·n)` values.
pub fn hill_tail_index(x: &[f64], top_fraction: f64) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    let k = ((top_fraction * a.len() as f64).ceil() as usize).clamp(1, a.len() - 1);
    let threshold = a[k].ln();
    let mean_excess = a[..k].iter().map(|v| v.ln() - threshold).sum::<f64>() / k as f64;
    1.0 / mean_excess
}

/// Standard error of the mean from `batches` non-overlapping batch means;
/// robust to serial correlation shorter than a batch.
pub fn batch_means_stderr(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = x.chunks_exact(size).take(batches).map(mean).collect();
    sample_std(&means) / (means.len() as f64).sqrt()
}
