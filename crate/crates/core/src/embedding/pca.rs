//! Principal components by power iteration with deflation, used to seed t-SNE.

use crate::matrix::DenseMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 1000;
const INIT_STD: f64 = 1e-4;
const START_SEED: u64 = 0x0005_eed0_f9ca;

#[derive(Debug, Clone)]
pub struct PrincipalComponents {
    pub mean: Vec<f64>,
    /// Unit-norm directions; a zero vector pads a rank-deficient dimension.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalue of each component (population normalisation).
    pub eigenvalues: Vec<f64>,
}

impl PrincipalComponents {
    /// Projects centred rows onto the components.
    pub fn project(&self, m: &DenseMatrix) -> DenseMatrix {
        let dims = self.components.len();
        let mut out = DenseMatrix::zeros(m.rows(), dims);
        for (r, row) in m.row_iter().enumerate() {
            for (c, comp) in self.components.iter().enumerate() {
                let v: f64 = row
                    .iter()
                    .zip(&self.mean)
                    .zip(comp)
                    .map(|((x, mu), w)| (x - mu) * w)
                    .sum();
                out.set(r, c, v);
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// `C v` with `C = X^T X / n` for the centred data `x`, without forming `C`.
fn cov_apply(x: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for row in x {
        let s = dot(row, v);
        for (o, r) in out.iter_mut().zip(row) {
            *o += s * r;
        }
    }
    let n = x.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= p * y;
        }
    }
}

pub fn principal_components(m: &DenseMatrix, dims: usize) -> PrincipalComponents {
    let (n, d) = m.shape();
    let mut mean = vec![0.0; d];
    for row in m.row_iter() {
        for (mu, x) in mean.iter_mut().zip(row) {
            *mu += x;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= n.max(1) as f64);
    let centred: Vec<Vec<f64>> = m
        .row_iter()
        .map(|row| row.iter().zip(&mean).map(|(x, mu)| x - mu).collect())
        .collect();

    let total_var: f64 = centred.iter().map(|r| dot(r, r)).sum::<f64>() / n.max(1) as f64;
    let negligible = total_var * 1e-14;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(START_SEED);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut components = Vec::with_capacity(dims);
    let mut eigenvalues = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        orthogonalize(&mut v, &found);
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            let mut next = cov_apply(&centred, &v);
            orthogonalize(&mut next, &found);
            lambda = normalize(&mut next);
            if lambda <= negligible {
                lambda = 0.0;
                break;
            }
            // Resolve the sign ambiguity before measuring movement.
            if dot(&next, &v) < 0.0 {
                next.iter_mut().for_each(|x| *x = -*x);
            }
            let moved = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            v = next;
            if moved < POWER_TOL {
                break;
            }
        }
        if lambda == 0.0 {
            components.push(vec![0.0; d]);
            eigenvalues.push(0.0);
        } else {
            found.push(v.clone());
            components.push(v);
            eigenvalues.push(lambda);
        }
    }
    PrincipalComponents {
        mean,
        components,
        eigenvalues,
    }
}

/// Projection onto the top `dims` principal components, scaled so the first
/// column has standard deviation `1e-4`. Constant data yields zeros.
pub fn pca_init(m: &DenseMatrix, dims: usize) -> DenseMatrix {
    let pcs = principal_components(m, dims);
    let mut y = pcs.project(m);
    let n = y.rows() as f64;
    let col0: Vec<f64> = (0..y.rows()).map(|r| y.get(r, 0)).collect();
    let mean0 = col0.iter().sum::<f64>() / n;
    let std0 = (col0.iter().map(|v| (v - mean0).powi(2)).sum::<f64>() / n).sqrt();
    if std0 > 0.0 {
        let s = INIT_STD / std0;
        y.values_mut().iter_mut().for_each(|v| *v *= s);
    } else {
        y.values_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Cyclic Jacobi eigen-decomposition of a symmetric matrix; test oracle.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn random(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Distinct column scales keep the spectrum well separated.
        let v = (0..n * d)
            .map(|k| rng.gen_range(-1.0..1.0) * (1.0 + (k % d) as f64))
            .collect();
        DenseMatrix::new(n, d, v).unwrap()
    }

    #[test]
    fn reconstruction_error_matches_eigen_oracle() {
        let m = random(20, 5, 42);
        let pcs = principal_components(&m, 2);
        let proj = pcs.project(&m);
        let mut err = 0.0;
        for r in 0..20 {
            for c in 0..5 {
                let centred = m.get(r, c) - pcs.mean[c];
                let recon: f64 = (0..2).map(|k| proj.get(r, k) * pcs.components[k][c]).sum();
                err += (centred - recon).powi(2);
            }
        }
        let mut cov = vec![vec![0.0; 5]; 5];
        for r in 0..20 {
            for i in 0..5 {
                for j in 0..5 {
                    cov[i][j] += (m.get(r, i) - pcs.mean[i]) * (m.get(r, j) - pcs.mean[j]) / 20.0;
                }
            }
        }
        let ev = jacobi_eigenvalues(cov);
        let oracle = 20.0 * ev[2..].iter().sum::<f64>();
        assert!((err - oracle).abs() < 1e-6, "{err} vs {oracle}");
        assert!((pcs.eigenvalues[0] - ev[0]).abs() < 1e-6);
        assert!((pcs.eigenvalues[1] - ev[1]).abs() < 1e-6);
    }

    #[test]
    fn two_dimensional_data_spans_itself() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let mean: Vec<f64> = (0..2)
            .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / 30.0)
            .collect();
        rows.iter_mut().for_each(|r| {
            r[0] -= mean[0];
            r[1] -= mean[1];
        });
        let m = DenseMatrix::from_rows(&rows).unwrap();
        let y = pca_init(&m, 2);
        // Least-squares fit of each original column from the projected
        // columns must be exact when the spans agree.
        let (a, b, c) = (0..30).fold((0.0, 0.0, 0.0), |(a, b, c), r| {
            (
                a + y.get(r, 0).powi(2),
                b + y.get(r, 0) * y.get(r, 1),
                c + y.get(r, 1).powi(2),
            )
        });
        let det = a * c - b * b;
        for col in 0..2 {
            let (u, v) = (0..30).fold((0.0, 0.0), |(u, v), r| {
                (
                    u + y.get(r, 0) * m.get(r, col),
                    v + y.get(r, 1) * m.get(r, col),
                )
            });
            let w0 = (c * u - b * v) / det;
            let w1 = (a * v - b * u) / det;
            let resid: f64 = (0..30)
                .map(|r| (m.get(r, col) - w0 * y.get(r, 0) - w1 * y.get(r, 1)).powi(2))
                .sum();
            assert!(resid.sqrt() < 1e-6, "residual {resid}");
        }
        let std0 = ((0..30).map(|r| y.get(r, 0).powi(2)).sum::<f64>() / 30.0).sqrt();
        assert!((std0 - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn constant_data_is_zero() {
        let m = DenseMatrix::new(6, 3, vec![2.5; 18]).unwrap();
        assert!(pca_init(&m, 2).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_deficient_pads_zero_column() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64, 0.0])
            .collect();
        let m = DenseMatrix::from_rows(&rows).unwrap();
        let pcs = principal_components(&m, 2);
        assert!(pcs.eigenvalues[0] > 0.0);
        assert_eq!(pcs.eigenvalues[1], 0.0);
        let y = pca_init(&m, 2);
        assert!((0..10).all(|r| y.get(r, 1) == 0.0));
    }
}
