//! Exact t-SNE: all-pairs gradient descent on KL(P || Q) with Student-t
//! low-dimensional affinities.

use super::affinity::pairwise_affinities_with;
use super::pca::pca_init;
use super::{EmbeddingError, EmbeddingSet, TsneConfig, TsneInit};
use crate::exec::Exec;
use crate::matrix::DenseMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const MOMENTUM_SWITCH_ITER: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
const RANDOM_INIT_STD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: DenseMatrix,
    pub final_kl: f64,
    pub config_used: TsneConfig,
}

pub fn tsne(e: &EmbeddingSet, cfg: &TsneConfig) -> Result<Projection2D, EmbeddingError> {
    tsne_with(e, cfg, Exec::default())
}

/// Fills `num` with `1 / (1 + |y_i - y_j|^2)` (zero diagonal) and returns the
/// normalising sum over all pairs.
fn student_t(y: &[f64], num: &mut [f64], n: usize, exec: Exec) -> f64 {
    let row_sums = exec.map_rows(num, n, |i, row| {
        let (a, b) = (y[2 * i], y[2 * i + 1]);
        let mut sum = 0.0;
        for (q, yj) in row.iter_mut().zip(y.chunks_exact(2)) {
            let dx = a - yj[0];
            let dy = b - yj[1];
            *q = 1.0 / (1.0 + dx * dx + dy * dy);
            sum += *q;
        }
        sum -= row[i];
        row[i] = 0.0;
        sum
    });
    row_sums.iter().sum()
}

fn gradient(
    p: &[f64],
    num: &[f64],
    y: &[f64],
    z: f64,
    exaggeration: f64,
    n: usize,
    exec: Exec,
) -> Vec<[f64; 2]> {
    let inv_z = 1.0 / z;
    exec.map_indices(n, |i| {
        let (a, b) = (y[2 * i], y[2 * i + 1]);
        let p_row = &p[i * n..(i + 1) * n];
        let q_row = &num[i * n..(i + 1) * n];
        let (mut ga, mut gb) = (0.0, 0.0);
        for ((pij, qij), yj) in p_row.iter().zip(q_row).zip(y.chunks_exact(2)) {
            let m = (exaggeration * pij - qij * inv_z) * qij;
            ga += m * (a - yj[0]);
            gb += m * (b - yj[1]);
        }
        [4.0 * ga, 4.0 * gb]
    })
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64, n: usize, exec: Exec) -> f64 {
    let rows = exec.map_indices(n, |i| {
        let mut s = 0.0;
        for j in 0..n {
            let pij = p[i * n + j];
            if j != i && pij > 0.0 {
                s += pij * (pij * z / num[i * n + j]).ln();
            }
        }
        s
    });
    rows.iter().sum()
}

fn initial_positions(e: &EmbeddingSet, cfg: &TsneConfig) -> Vec<f64> {
    match cfg.init {
        TsneInit::Pca => pca_init(e.matrix(), 2).into_values(),
        TsneInit::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let d = Normal::new(0.0, RANDOM_INIT_STD).expect("valid std");
            (0..2 * e.len()).map(|_| d.sample(&mut rng)).collect()
        }
    }
}

pub fn tsne_with(
    e: &EmbeddingSet,
    cfg: &TsneConfig,
    exec: Exec,
) -> Result<Projection2D, EmbeddingError> {
    let n = e.len();
    cfg.validate(n)?;
    let p = pairwise_affinities_with(e.matrix(), cfg.perplexity, exec)?.p;

    let mut y = initial_positions(e, cfg);
    let mut update = vec![0.0f64; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut num = vec![0.0; n * n];

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < cfg.exaggeration_iters {
            cfg.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < MOMENTUM_SWITCH_ITER {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };
        let z = student_t(&y, &mut num, n, exec);
        let grad = gradient(&p, &num, &y, z, exaggeration, n, exec);

        for (k, g) in grad.iter().flatten().enumerate() {
            if (update[k] > 0.0) != (*g > 0.0) {
                gains[k] += 0.2;
            } else {
                gains[k] *= 0.8;
            }
            gains[k] = gains[k].max(MIN_GAIN);
            update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * g;
            y[k] += update[k];
        }
        for c in 0..2 {
            let mean = y.iter().skip(c).step_by(2).sum::<f64>() / n as f64;
            y.iter_mut().skip(c).step_by(2).for_each(|v| *v -= mean);
        }
    }

    let z = student_t(&y, &mut num, n, exec);
    let final_kl = kl_divergence(&p, &num, z, n, exec);
    Ok(Projection2D {
        points: DenseMatrix::new(n, 2, y).expect("2n coordinates"),
        final_kl,
        config_used: *cfg,
    })
}
