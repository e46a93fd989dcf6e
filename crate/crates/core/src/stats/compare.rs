use super::kde::{gaussian_kde, Bandwidth, KdeCurve, DEFAULT_GRID_SIZE};
use super::ks::ks_statistic;
use super::summary::mean_std;
use super::{DeltaSeries, StatsError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakOrdering {
    SuspectHigher,
    CleanHigher,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub ks_statistic: f64,
    pub zero_peak_density_clean: f64,
    pub zero_peak_density_suspect: f64,
    pub peak_ordering: PeakOrdering,
    pub mass_within_eps_clean: f64,
    pub mass_within_eps_suspect: f64,
    pub eps: f64,
    pub bandwidth_clean: f64,
    pub bandwidth_suspect: f64,
    pub nonfinite_clean: usize,
    pub nonfinite_suspect: usize,
}

/// `1e-3` times the clean series' population std, floored at `1e-6`.
pub fn default_eps(clean: &DeltaSeries) -> f64 {
    let finite = clean.finite_values();
    if finite.is_empty() {
        return 1e-6;
    }
    (1e-3 * mean_std(&finite).1).max(1e-6)
}

fn mass_within(values: &[f64], eps: f64) -> f64 {
    values.iter().filter(|v| v.abs() < eps).count() as f64 / values.len() as f64
}

/// Compares two series by KS distance, KDE density near zero and the fraction
/// of values within `eps` of zero. `eps = None` uses [`default_eps`].
pub fn compare_deltas(
    clean: &DeltaSeries,
    suspect: &DeltaSeries,
    eps: Option<f64>,
    bandwidth: Bandwidth,
) -> Result<DistanceReport, StatsError> {
    compare_deltas_with_curves(clean, suspect, eps, bandwidth).map(|(r, _, _)| r)
}

pub fn compare_deltas_with_curves(
    clean: &DeltaSeries,
    suspect: &DeltaSeries,
    eps: Option<f64>,
    bandwidth: Bandwidth,
) -> Result<(DistanceReport, KdeCurve, KdeCurve), StatsError> {
    let eps = eps.unwrap_or_else(|| default_eps(clean));
    if !(eps > 0.0) {
        return Err(StatsError::InvalidParameter(format!(
            "eps must be > 0, got {eps}"
        )));
    }
    let ks = ks_statistic(clean, suspect)?;
    let kde_clean = gaussian_kde(clean, bandwidth, DEFAULT_GRID_SIZE)?;
    let kde_suspect = gaussian_kde(suspect, bandwidth, DEFAULT_GRID_SIZE)?;
    let zc = kde_clean.density_nearest(0.0);
    let zs = kde_suspect.density_nearest(0.0);
    let peak_ordering = if zs > zc {
        PeakOrdering::SuspectHigher
    } else if zc > zs {
        PeakOrdering::CleanHigher
    } else {
        PeakOrdering::Equal
    };
    let report = DistanceReport {
        ks_statistic: ks,
        zero_peak_density_clean: zc,
        zero_peak_density_suspect: zs,
        peak_ordering,
        mass_within_eps_clean: mass_within(&clean.finite_values(), eps),
        mass_within_eps_suspect: mass_within(&suspect.finite_values(), eps),
        eps,
        bandwidth_clean: kde_clean.bandwidth,
        bandwidth_suspect: kde_suspect.bandwidth,
        nonfinite_clean: clean.nonfinite_count,
        nonfinite_suspect: suspect.nonfinite_count,
    };
    Ok((report, kde_clean, kde_suspect))
}
