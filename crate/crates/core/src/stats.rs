//! Small statistical helpers: percentiles, winsorization, bandwidth rules.

use crate::error::{Error, Result};

/// Linear-interpolation percentile (the "R-7" convention): for quantile `q`
/// in [0, 100] the rank is `(n - 1) * q / 100` and fractional ranks
/// interpolate between order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("percentile of empty list".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Argument(format!(
            "percentile must lie in [0, 100], got {q}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in percentile"));
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let rank = (n - 1) as f64 * q / 100.0;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    Ok(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}

/// Clamp every value into the empirical percentile band `[lower_pct, upper_pct]`.
/// Length and order are preserved.
pub fn winsorize(values: &[f64], lower_pct: f64, upper_pct: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Argument("winsorize of empty list".into()));
    }
    if !(0.0 <= lower_pct && lower_pct < upper_pct && upper_pct <= 100.0) {
        return Err(Error::Argument(format!(
            "winsorization band must satisfy 0 <= lower < upper <= 100, got [{lower_pct}, {upper_pct}]"
        )));
    }
    let lo = percentile(values, lower_pct)?;
    let hi = percentile(values, upper_pct)?;
    Ok(values.iter().map(|&v| v.clamp(lo, hi)).collect())
}

/// Silverman's rule-of-thumb bandwidth for a weighted one-dimensional sample.
///
/// Uses the effective sample size `(sum w)^2 / sum w^2` and the weighted
/// standard deviation.
pub fn silverman_bandwidth(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::Argument(
            "bandwidth needs equal-length non-empty values and weights".into(),
        ));
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::Argument("total weight must be positive".into()));
    }
    let mean: f64 = values
        .iter()
        .zip(weights)
        .map(|(&v, &w)| v * w)
        .sum::<f64>()
        / wsum;
    let var: f64 = values
        .iter()
        .zip(weights)
        .map(|(&v, &w)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / wsum;
    let w2sum: f64 = weights.iter().map(|&w| w * w).sum();
    let n_eff = wsum * wsum / w2sum;
    let sd = var.sqrt();
    if sd == 0.0 {
        // Degenerate sample: fall back to a nominal width.
        return Ok(1e-3 * (1.0 + mean.abs()));
    }
    Ok(1.06 * sd * n_eff.powf(-0.2))
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}
