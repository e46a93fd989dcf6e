use super::EmbeddingError;
use crate::exec::Exec;
use crate::matrix::{sq_dist, DenseMatrix};

/// Mean silhouette `(b - a) / max(a, b)` over all points, Euclidean distance.
///
/// Singleton clusters contribute 0, as does any point with `a = b = 0`.
pub fn silhouette(points: &DenseMatrix, assignments: &[usize]) -> Result<f64, EmbeddingError> {
    silhouette_with(points, assignments, Exec::default())
}

pub fn silhouette_with(
    points: &DenseMatrix,
    assignments: &[usize],
    exec: Exec,
) -> Result<f64, EmbeddingError> {
    let n = points.rows();
    if assignments.len() != n {
        return Err(EmbeddingError::SingleCluster(format!(
            "{} assignments for {n} points",
            assignments.len()
        )));
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if k < 2 {
        return Err(EmbeddingError::SingleCluster(format!("{k} cluster(s)")));
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(EmbeddingError::SingleCluster(format!(
            "cluster {empty} is empty"
        )));
    }

    let scores = exec.map_indices(n, |i| {
        let own = assignments[i];
        if sizes[own] == 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        let xi = points.row(i);
        for j in 0..n {
            if j != i {
                sums[assignments[j]] += sq_dist(xi, points.row(j)).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom == 0.0 {
            0.0
        } else {
            (b - a) / denom
        }
    });
    Ok(scores.iter().sum::<f64>() / n as f64)
}
