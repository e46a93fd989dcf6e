//! Cluster-structure analysis of context embeddings.
//!
//! Embeddings are projected to 2-D with exact t-SNE, clustered with k-means,
//! and scored with silhouettes. [`detect_signal`] turns that into a verdict on
//! whether a subset of samples forms separate groups, the footprint left by
//! trigger-bearing inputs on a poisoned model.

mod affinity;
mod kmeans;
mod pca;
mod signal;
mod silhouette;
mod tsne;

pub use affinity::{
    conditional_affinities, pairwise_affinities, pairwise_affinities_with, squared_distances,
    AffinityMatrix, ConditionalAffinities, P_FLOOR,
};
pub use kmeans::{estimate_cluster_count, kmeans, ClusterCountEstimate, ClusterResult};
pub use pca::{pca_init, principal_components, PrincipalComponents};
pub use signal::{
    detect_signal, detect_signal_with_projection, DetectConfig, ScoreSpace, SignalMode,
    SignalVerdict,
};
pub use silhouette::{silhouette, silhouette_with};
pub use tsne::{tsne, tsne_with, Projection2D};

use crate::matrix::DenseMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("invalid embedding set: {0}")]
    InvalidSet(String),
    #[error("invalid t-SNE configuration for {n} samples: {reason}")]
    InvalidConfig { n: usize, reason: String },
    #[error("all pairwise distances are zero")]
    DegenerateGeometry,
    #[error("k = {k} is invalid for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("silhouette needs at least two non-empty clusters: {0}")]
    SingleCluster(String),
    #[error("too few samples: {n} < {min}")]
    TooFewSamples { n: usize, min: usize },
    #[error("labeled mode needs both clean and poisoned samples ({poisoned} poisoned of {n})")]
    InsufficientPoisoned { poisoned: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    matrix: DenseMatrix,
    sample_ids: Vec<String>,
    poison_flags: Option<Vec<bool>>,
}

impl EmbeddingSet {
    pub fn new(
        matrix: DenseMatrix,
        sample_ids: Vec<String>,
        poison_flags: Option<Vec<bool>>,
    ) -> Result<Self, EmbeddingError> {
        let n = matrix.rows();
        if n < 1 {
            return Err(EmbeddingError::InvalidSet("no samples".into()));
        }
        if matrix.cols() < 2 {
            return Err(EmbeddingError::InvalidSet(format!(
                "embedding dimension {} < 2",
                matrix.cols()
            )));
        }
        if matrix.nonfinite_count() > 0 {
            return Err(EmbeddingError::InvalidSet(format!(
                "{} non-finite embedding values",
                matrix.nonfinite_count()
            )));
        }
        if sample_ids.len() != n {
            return Err(EmbeddingError::InvalidSet(format!(
                "{} ids for {n} samples",
                sample_ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = sample_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(EmbeddingError::InvalidSet(format!("duplicate id {dup:?}")));
        }
        if let Some(f) = &poison_flags {
            if f.len() != n {
                return Err(EmbeddingError::InvalidSet(format!(
                    "{} poison flags for {n} samples",
                    f.len()
                )));
            }
        }
        Ok(Self {
            matrix,
            sample_ids,
            poison_flags,
        })
    }

    /// Ids are the row indices.
    pub fn unlabeled(matrix: DenseMatrix) -> Result<Self, EmbeddingError> {
        let ids = (0..matrix.rows()).map(|i| i.to_string()).collect();
        Self::new(matrix, ids, None)
    }

    pub fn labeled(matrix: DenseMatrix, flags: Vec<bool>) -> Result<Self, EmbeddingError> {
        let ids = (0..matrix.rows()).map(|i| i.to_string()).collect();
        Self::new(matrix, ids, Some(flags))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn poison_flags(&self) -> Option<&[bool]> {
        self.poison_flags.as_deref()
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsneInit {
    Pca,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub init: TsneInit,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            seed: 0,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            init: TsneInit::Pca,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<(), EmbeddingError> {
        let err = |reason: String| Err(EmbeddingError::InvalidConfig { n, reason });
        let max_perplexity = (n as f64 - 1.0) / 3.0;
        if !(self.perplexity >= 1.0 && self.perplexity <= max_perplexity) {
            return err(format!(
                "perplexity {} outside [1, {max_perplexity:.4}] (at most (N-1)/3)",
                self.perplexity
            ));
        }
        if self.exaggeration_iters > self.iterations {
            return err(format!(
                "exaggeration_iters {} > iterations {}",
                self.exaggeration_iters, self.iterations
            ));
        }
        if !(self.learning_rate > 0.0) {
            return err(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        Ok(())
    }
}
