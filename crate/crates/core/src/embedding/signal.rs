use super::kmeans::estimate_cluster_count;
use super::silhouette::silhouette;
use super::tsne::{tsne, Projection2D};
use super::{EmbeddingError, EmbeddingSet, TsneConfig};
use crate::matrix::DenseMatrix;
use serde::{Deserialize, Serialize};

pub const MIN_SIGNAL_SAMPLES: usize = 12;

/// Where separability is scored. The 2-D projection is what a human inspects;
/// the original space is offered as a robustness check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSpace {
    #[default]
    Projection,
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub tau: f64,
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    pub space: ScoreSpace,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            tau: 0.25,
            seed: 0,
            k_min: 2,
            k_max: 10,
            space: ScoreSpace::Projection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalMode {
    Labeled,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalVerdict {
    pub flagged: bool,
    pub separation_score: f64,
    pub estimated_trigger_clusters: Option<usize>,
    pub threshold_used: f64,
    pub mode: SignalMode,
    /// Set when labels were supplied but could not be used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    pub config: TsneConfig,
    pub final_kl: f64,
}

pub fn detect_signal(
    e: &EmbeddingSet,
    cfg: &TsneConfig,
    detect: &DetectConfig,
) -> Result<(SignalVerdict, Projection2D), EmbeddingError> {
    if e.len() < MIN_SIGNAL_SAMPLES {
        return Err(EmbeddingError::TooFewSamples {
            n: e.len(),
            min: MIN_SIGNAL_SAMPLES,
        });
    }
    let projection = tsne(e, cfg)?;
    let verdict = detect_signal_with_projection(e, &projection, detect)?;
    Ok((verdict, projection))
}

/// Scores an existing projection of `e`.
pub fn detect_signal_with_projection(
    e: &EmbeddingSet,
    projection: &Projection2D,
    detect: &DetectConfig,
) -> Result<SignalVerdict, EmbeddingError> {
    let n = e.len();
    if n < MIN_SIGNAL_SAMPLES {
        return Err(EmbeddingError::TooFewSamples {
            n,
            min: MIN_SIGNAL_SAMPLES,
        });
    }
    if projection.points.rows() != n {
        return Err(EmbeddingError::InvalidSet(format!(
            "projection has {} rows for {n} samples",
            projection.points.rows()
        )));
    }
    let space = match detect.space {
        ScoreSpace::Projection => &projection.points,
        ScoreSpace::Original => e.matrix(),
    };
    let base = SignalVerdict {
        flagged: false,
        separation_score: 0.0,
        estimated_trigger_clusters: None,
        threshold_used: detect.tau,
        mode: SignalMode::Unlabeled,
        fallback_reason: None,
        config: projection.config_used,
        final_kl: projection.final_kl,
    };

    let mut fallback_reason = None;
    if let Some(flags) = e.poison_flags() {
        match labeled(space, &projection.points, flags, detect) {
            Ok((score, clusters)) => {
                return Ok(SignalVerdict {
                    flagged: score > detect.tau,
                    separation_score: score,
                    estimated_trigger_clusters: clusters,
                    mode: SignalMode::Labeled,
                    ..base
                });
            }
            Err(err @ EmbeddingError::InsufficientPoisoned { .. }) => {
                fallback_reason = Some(err.to_string());
            }
            Err(err) => return Err(err),
        }
    }

    let k_max = detect.k_max.min(n);
    let est = estimate_cluster_count(space, detect.k_min, k_max, detect.seed)?;
    Ok(SignalVerdict {
        flagged: est.silhouette > detect.tau && est.k >= 2,
        separation_score: est.silhouette,
        fallback_reason,
        ..base
    })
}

fn labeled(
    space: &DenseMatrix,
    projected: &DenseMatrix,
    flags: &[bool],
    detect: &DetectConfig,
) -> Result<(f64, Option<usize>), EmbeddingError> {
    let n = flags.len();
    let poisoned: Vec<usize> = (0..n).filter(|&i| flags[i]).collect();
    if poisoned.is_empty() || poisoned.len() == n {
        return Err(EmbeddingError::InsufficientPoisoned {
            poisoned: poisoned.len(),
            n,
        });
    }
    let partition: Vec<usize> = flags.iter().map(|&f| usize::from(f)).collect();
    let score = silhouette(space, &partition)?;
    let clusters = if poisoned.len() >= 2 * detect.k_min {
        let subset = projected.select_rows(&poisoned);
        let k_max = detect.k_max.min(poisoned.len());
        Some(estimate_cluster_count(&subset, detect.k_min, k_max, detect.seed)?.k)
    } else {
        None
    };
    Ok((score, clusters))
}
