//! Seeded k-means++ / Lloyd clustering and silhouette-based choice of k.

use super::silhouette::silhouette;
use super::EmbeddingError;
use crate::matrix::{sq_dist, DenseMatrix};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

const MAX_LLOYD_ITERS: usize = 300;
const CENTROID_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: DenseMatrix,
    pub silhouette: f64,
    pub inertia: f64,
    pub iterations: usize,
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.iter().enumerate() {
        let d = sq_dist(x, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &DenseMatrix, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every remaining point coincides with a centroid.
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                free[rng.gen_range(0..free.len())]
            }
        };
        chosen[pick] = true;
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &DenseMatrix, centroids: &[Vec<f64>], out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, a) in out.iter_mut().enumerate() {
        let (c, d) = nearest(points.row(i), centroids);
        *a = c;
        inertia += d;
    }
    inertia
}

/// k-means++ seeding followed by Lloyd iterations until no centroid moves by
/// more than `1e-8` or 300 iterations. Empty clusters are reseeded with the
/// point farthest from its centroid.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64) -> Result<ClusterResult, EmbeddingError> {
    let (n, d) = points.shape();
    if k == 0 || k > n {
        return Err(EmbeddingError::InvalidK { k, n });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut inertia = assign(points, &centroids, &mut assignments);
    let mut iterations = 0;

    for _ in 0..MAX_LLOYD_ITERS {
        iterations += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &c), old)| {
                if c == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / c as f64).collect()
                }
            })
            .collect();
        for empty in 0..k {
            if counts[empty] != 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&i, &j| {
                    let di = sq_dist(points.row(i), &next[assignments[i]]);
                    let dj = sq_dist(points.row(j), &next[assignments[j]]);
                    di.total_cmp(&dj).then(j.cmp(&i))
                });
            if let Some(far) = far {
                counts[assignments[far]] -= 1;
                assignments[far] = empty;
                counts[empty] = 1;
                next[empty] = points.row(far).to_vec();
            }
        }
        let movement = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let updated = assign(points, &centroids, &mut assignments);
        debug_assert!(
            updated <= inertia * (1.0 + 1e-12) + 1e-12,
            "inertia rose from {inertia} to {updated}"
        );
        inertia = updated;
        if movement < CENTROID_TOL {
            break;
        }
    }

    // Lloyd can still leave a cluster empty when points coincide.
    let mut counts = vec![0usize; k];
    assignments.iter().for_each(|&a| counts[a] += 1);
    let all_used = counts.iter().all(|&c| c > 0);
    let silhouette = if k == 1 || !all_used {
        0.0
    } else {
        silhouette(points, &assignments)?
    };
    let centroid_values = centroids.into_iter().flatten().collect();
    Ok(ClusterResult {
        k,
        assignments,
        centroids: DenseMatrix::new(k, d, centroid_values).expect("k x d"),
        silhouette,
        inertia,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCountEstimate {
    pub k: usize,
    pub silhouette: f64,
    /// `(k, silhouette)` for every k tried.
    pub scores: Vec<(usize, f64)>,
}

/// Picks the k in `k_min..=k_max` whose k-means clustering has the highest
/// silhouette; ties go to the smaller k.
pub fn estimate_cluster_count(
    points: &DenseMatrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<ClusterCountEstimate, EmbeddingError> {
    let n = points.rows();
    if k_min < 2 || k_min > k_max || k_max > n {
        return Err(EmbeddingError::InvalidK { k: k_max, n });
    }
    let mut scores = Vec::with_capacity(k_max - k_min + 1);
    let mut best = (k_min, f64::NEG_INFINITY);
    for k in k_min..=k_max {
        let s = kmeans(points, k, seed)?.silhouette;
        scores.push((k, s));
        if s > best.1 {
            best = (k, s);
        }
    }
    Ok(ClusterCountEstimate {
        k: best.0,
        silhouette: best.1,
        scores,
    })
}
