//! Distribution analysis of attention parameters.
//!
//! Parameters are flattened into [`DeltaSeries`] (raw values, fine-tuned minus
//! pre-trained differences, or relative differences), then summarised,
//! smoothed with a Gaussian KDE and compared between a clean and a suspect
//! model.

mod compare;
mod kde;
mod ks;
mod summary;

pub use compare::{
    compare_deltas, compare_deltas_with_curves, default_eps, DistanceReport, PeakOrdering,
};
pub use kde::{
    gaussian_kde, gaussian_kde_with, silverman_bandwidth, Bandwidth, KdeCurve, DEFAULT_GRID_SIZE,
};
pub use ks::ks_statistic;
pub use summary::{quantile_sorted, summarize, DistSummary, Quantiles};

use crate::matrix::DenseMatrix;
use crate::schema::AttnParamRef;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("shape mismatch: fine-tuned {ft:?} vs pre-trained {pt:?}")]
    ShapeMismatch {
        ft: (usize, usize),
        pt: (usize, usize),
    },
    #[error("series has no finite values")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate KDE grid [{lo}, {hi}]")]
    DegenerateGrid { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMode {
    Raw,
    Delta,
    NormalizedDelta,
}

/// Label recorded in reports for the relative-change normalisation.
pub const NORMALIZATION_MODE: &str = "relative-eps";
pub const DEFAULT_NORMALIZATION_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub values: Vec<f64>,
    pub source_ref: Option<AttnParamRef>,
    pub mode: SeriesMode,
    pub nonfinite_count: usize,
}

impl DeltaSeries {
    pub fn new(values: Vec<f64>, mode: SeriesMode) -> Self {
        let nonfinite_count = values.iter().filter(|v| !v.is_finite()).count();
        Self {
            values,
            source_ref: None,
            mode,
            nonfinite_count,
        }
    }

    pub fn raw(m: &DenseMatrix) -> Self {
        Self::new(m.values().to_vec(), SeriesMode::Raw)
    }

    pub fn with_ref(mut self, r: AttnParamRef) -> Self {
        self.source_ref = Some(r);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn finite_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .collect()
    }
}

fn check_shapes(ft: &DenseMatrix, pt: &DenseMatrix) -> Result<(), StatsError> {
    if ft.shape() != pt.shape() {
        return Err(StatsError::ShapeMismatch {
            ft: ft.shape(),
            pt: pt.shape(),
        });
    }
    Ok(())
}

/// Elementwise `ft - pt` in row-major order.
pub fn flatten_delta(ft: &DenseMatrix, pt: &DenseMatrix) -> Result<DeltaSeries, StatsError> {
    check_shapes(ft, pt)?;
    let values = ft
        .values()
        .iter()
        .zip(pt.values())
        .map(|(f, p)| f - p)
        .collect();
    Ok(DeltaSeries::new(values, SeriesMode::Delta))
}

/// Relative change `(ft - pt) / max(|pt|, eps)`.
pub fn normalized_delta(
    ft: &DenseMatrix,
    pt: &DenseMatrix,
    eps: f64,
) -> Result<DeltaSeries, StatsError> {
    check_shapes(ft, pt)?;
    if !(eps > 0.0) {
        return Err(StatsError::InvalidParameter(format!(
            "eps must be > 0, got {eps}"
        )));
    }
    let values = ft
        .values()
        .iter()
        .zip(pt.values())
        .map(|(f, p)| (f - p) / p.abs().max(eps))
        .collect();
    Ok(DeltaSeries::new(values, SeriesMode::NormalizedDelta))
}
