use super::summary::sorted_finite;
use super::{DeltaSeries, StatsError};

/// Two-sample Kolmogorov-Smirnov statistic: the largest gap between the two
/// empirical CDFs. Non-finite values are ignored.
pub fn ks_statistic(a: &DeltaSeries, b: &DeltaSeries) -> Result<f64, StatsError> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}
