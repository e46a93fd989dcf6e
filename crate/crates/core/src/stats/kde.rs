//! One-dimensional Gaussian kernel density estimation on a uniform grid.

use super::summary::{quantile_sorted, sorted_finite};
use super::{DeltaSeries, StatsError};
use crate::exec::Exec;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_GRID_SIZE: usize = 512;
const SILVERMAN_STD_ZERO_FALLBACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "lowercase")]
pub enum Bandwidth {
    Silverman,
    Fixed(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("silverman") {
            return Ok(Bandwidth::Silverman);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(format!(
                "bandwidth must be 'silverman' or a positive number, got {s:?}"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub rule: Bandwidth,
    pub sample_count: usize,
}

impl KdeCurve {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &d) in self.density.iter().enumerate() {
            if d > self.density[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_density(&self) -> f64 {
        self.density[self.argmax()]
    }

    /// Density at the grid point closest to `x` (the lower one on ties).
    pub fn density_nearest(&self, x: f64) -> f64 {
        let mut best = 0;
        for (i, g) in self.grid.iter().enumerate() {
            if (g - x).abs() < (self.grid[best] - x).abs() {
                best = i;
            }
        }
        self.density[best]
    }

    pub fn trapezoid_mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }
}

/// Silverman's rule of thumb: `0.9 * min(std, IQR / 1.34) * n^(-1/5)`.
///
/// Falls back to `1.06 * std * n^(-1/5)` when the IQR is zero, and to `1e-12`
/// when the standard deviation is zero. `sorted` must be sorted and finite.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let std = if sorted.len() > 1 && sorted[0] != sorted[sorted.len() - 1] {
        let mean = sorted.iter().sum::<f64>() / n;
        (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    if std == 0.0 {
        return SILVERMAN_STD_ZERO_FALLBACK;
    }
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let scale = n.powf(-0.2);
    if iqr == 0.0 {
        1.06 * std * scale
    } else {
        0.9 * std.min(iqr / 1.34) * scale
    }
}

pub fn gaussian_kde(
    s: &DeltaSeries,
    bandwidth: Bandwidth,
    grid_size: usize,
) -> Result<KdeCurve, StatsError> {
    gaussian_kde_with(s, bandwidth, grid_size, Exec::default())
}

pub fn gaussian_kde_with(
    s: &DeltaSeries,
    bandwidth: Bandwidth,
    grid_size: usize,
    exec: Exec,
) -> Result<KdeCurve, StatsError> {
    if grid_size < 2 {
        return Err(StatsError::InvalidParameter(format!(
            "grid_size must be >= 2, got {grid_size}"
        )));
    }
    let sorted = sorted_finite(s)?;
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(&sorted),
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => {
            return Err(StatsError::InvalidParameter(format!(
                "bandwidth must be > 0, got {h}"
            )))
        }
    };
    let lo = sorted[0] - 4.0 * h;
    let hi = sorted[sorted.len() - 1] + 4.0 * h;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();
    if !(step > 0.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StatsError::DegenerateGrid { lo, hi });
    }

    let inv_h = 1.0 / h;
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * PI).sqrt());
    let density = exec.map_indices(grid_size, |g| {
        let x = grid[g];
        let sum: f64 = sorted
            .iter()
            .map(|v| {
                let u = (x - v) * inv_h;
                (-0.5 * u * u).exp()
            })
            .sum();
        sum * norm
    });
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
        rule: bandwidth,
        sample_count: sorted.len(),
    })
}
