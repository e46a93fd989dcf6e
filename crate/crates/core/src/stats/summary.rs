use super::{DeltaSeries, StatsError};
use serde::{Deserialize, Serialize};

pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p01: f64,
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub p99: f64,
}

impl Quantiles {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.p01, self.p05, self.p25, self.p50, self.p75, self.p95, self.p99,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSummary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub quantiles: Quantiles,
    pub nonfinite_count: usize,
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub(crate) fn sorted_finite(s: &DeltaSeries) -> Result<Vec<f64>, StatsError> {
    let mut v = s.finite_values();
    if v.is_empty() {
        return Err(StatsError::Empty);
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    // Summation rounding would otherwise give constant data a tiny nonzero spread.
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(s: &DeltaSeries) -> Result<DistSummary, StatsError> {
    let sorted = sorted_finite(s)?;
    let (mean, std) = mean_std(&sorted);
    let q = QUANTILE_LEVELS.map(|l| quantile_sorted(&sorted, l));
    Ok(DistSummary {
        count: sorted.len(),
        mean,
        std,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        quantiles: Quantiles {
            p01: q[0],
            p05: q[1],
            p25: q[2],
            p50: q[3],
            p75: q[4],
            p95: q[5],
            p99: q[6],
        },
        nonfinite_count: s.nonfinite_count,
    })
}
