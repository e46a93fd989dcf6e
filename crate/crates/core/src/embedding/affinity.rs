//! High-dimensional t-SNE affinities with per-point perplexity calibration.

use super::EmbeddingError;
use crate::exec::Exec;
use crate::matrix::{sq_dist, DenseMatrix};

/// Lower bound applied to every off-diagonal joint affinity.
pub const P_FLOOR: f64 = 1e-12;
const MAX_BISECTION_STEPS: usize = 200;
const PERPLEXITY_TOL: f64 = 1e-6;
/// Half-width, in natural-log units, of the log-sigma search bracket.
const LOG_SIGMA_SPAN: f64 = 40.0;

/// Row-major `n x n` squared Euclidean distances.
pub fn squared_distances(m: &DenseMatrix, exec: Exec) -> Vec<f64> {
    let n = m.rows();
    let mut d = vec![0.0; n * n];
    exec.for_each_row(&mut d, n, |i, row| {
        let xi = m.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            if j != i {
                *out = sq_dist(xi, m.row(j));
            }
        }
    });
    d
}

#[derive(Debug, Clone)]
pub struct ConditionalAffinities {
    pub n: usize,
    /// Row `i` holds `p_{j|i}`; rows sum to one and the diagonal is zero.
    pub rows: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Perplexity achieved by each row, `exp` of its Shannon entropy.
    pub perplexities: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    pub n: usize,
    /// Symmetric joint affinities, row-major `n x n`.
    pub p: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl AffinityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn total_mass(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Gaussian conditional distribution over `dist` (squared distances, entry
/// `skip` excluded) at `sigma`. Returns the achieved perplexity.
fn conditional_row(dist: &[f64], skip: usize, d_min: f64, sigma: f64, out: &mut [f64]) -> f64 {
    let beta = 1.0 / (2.0 * sigma * sigma);
    let mut z = 0.0;
    for (j, (&d, o)) in dist.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == skip {
            0.0
        } else {
            (-(d - d_min) * beta).exp()
        };
        z += *o;
    }
    let mut entropy = 0.0;
    for o in out.iter_mut() {
        *o /= z;
        if *o > 0.0 {
            entropy -= *o * o.ln();
        }
    }
    entropy.exp()
}

fn calibrate_row(dist: &[f64], i: usize, target: f64, out: &mut [f64]) -> (f64, f64) {
    let mut d_min = f64::INFINITY;
    let mut d_sum = 0.0;
    for (j, &d) in dist.iter().enumerate() {
        if j != i {
            d_min = d_min.min(d);
            d_sum += d;
        }
    }
    let scale = (d_sum / (dist.len() - 1) as f64)
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let mut lo = scale.ln() - LOG_SIGMA_SPAN;
    let mut hi = scale.ln() + LOG_SIGMA_SPAN;
    let mut log_sigma = scale.ln();
    let mut perp = conditional_row(dist, i, d_min, log_sigma.exp(), out);
    for _ in 0..MAX_BISECTION_STEPS {
        if (perp - target).abs() < PERPLEXITY_TOL {
            break;
        }
        if perp > target {
            hi = log_sigma;
        } else {
            lo = log_sigma;
        }
        let next = 0.5 * (lo + hi);
        if next == log_sigma {
            break;
        }
        log_sigma = next;
        perp = conditional_row(dist, i, d_min, log_sigma.exp(), out);
    }
    (log_sigma.exp(), perp)
}

fn conditional_from_distances(
    dist: &[f64],
    n: usize,
    perplexity: f64,
    exec: Exec,
) -> Result<ConditionalAffinities, EmbeddingError> {
    if n < 2 {
        return Err(EmbeddingError::InvalidConfig {
            n,
            reason: "need at least two points".into(),
        });
    }
    if dist.iter().all(|&d| d == 0.0) {
        return Err(EmbeddingError::DegenerateGeometry);
    }
    let mut rows = vec![0.0; n * n];
    let calibrated = exec.map_rows(&mut rows, n, |i, row| {
        calibrate_row(&dist[i * n..(i + 1) * n], i, perplexity, row)
    });
    let (sigmas, perplexities) = calibrated.into_iter().unzip();
    Ok(ConditionalAffinities {
        n,
        rows,
        sigmas,
        perplexities,
    })
}

/// Conditional affinities `p_{j|i}` calibrated to `perplexity`.
pub fn conditional_affinities(
    m: &DenseMatrix,
    perplexity: f64,
    exec: Exec,
) -> Result<ConditionalAffinities, EmbeddingError> {
    let dist = squared_distances(m, exec);
    conditional_from_distances(&dist, m.rows(), perplexity, exec)
}

/// Symmetrised joint affinities `P = (P_cond + P_cond^T) / 2N`, floored at
/// [`P_FLOOR`] off the diagonal.
pub fn pairwise_affinities(
    m: &DenseMatrix,
    perplexity: f64,
) -> Result<AffinityMatrix, EmbeddingError> {
    pairwise_affinities_with(m, perplexity, Exec::default())
}

pub fn pairwise_affinities_with(
    m: &DenseMatrix,
    perplexity: f64,
    exec: Exec,
) -> Result<AffinityMatrix, EmbeddingError> {
    let n = m.rows();
    if n < 4 {
        return Err(EmbeddingError::TooFewSamples { n, min: 4 });
    }
    let cond = conditional_affinities(m, perplexity, exec)?;
    Ok(symmetrize(cond, exec))
}

fn symmetrize(cond: ConditionalAffinities, exec: Exec) -> AffinityMatrix {
    let n = cond.n;
    let denom = 2.0 * n as f64;
    let c = &cond.rows;
    let mut p = vec![0.0; n * n];
    exec.for_each_row(&mut p, n, |i, row| {
        for (j, out) in row.iter_mut().enumerate() {
            if j != i {
                *out = ((c[i * n + j] + c[j * n + i]) / denom).max(P_FLOOR);
            }
        }
    });
    AffinityMatrix {
        n,
        p,
        sigmas: cond.sigmas,
    }
}
