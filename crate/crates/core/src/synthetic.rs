//! Seeded generators for synthetic embeddings and checkpoints.
//!
//! These back the acceptance scenarios and benchmarks, and are handy for
//! exercising the CLI without real model exports.

use crate::matrix::DenseMatrix;
use crate::schema::{enumerate_refs, ArchKind, LayerSelection, NamingProfile, ParamKind};
use crate::tensor_io::{write_tensor_store_bytes, DType, TensorWrite};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn normal_vec(rng: &mut ChaCha8Rng, d: usize, std: f64) -> Vec<f64> {
    (0..d)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut *rng))
        .collect()
}

/// Isotropic Gaussian blobs. Centres are drawn from `N(0, center_std^2 I)`,
/// points from `N(centre, point_std^2 I)`. Returns rows in blob order and
/// the blob label of each row.
pub fn gaussian_blobs(
    sizes: &[usize],
    dim: usize,
    center_std: f64,
    point_std: f64,
    seed: u64,
) -> (DenseMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(sizes.iter().sum::<usize>() * dim);
    let mut labels = Vec::new();
    for (k, &size) in sizes.iter().enumerate() {
        let centre = normal_vec(&mut rng, dim, center_std);
        for _ in 0..size {
            for c in &centre {
                values.push(
                    c + point_std
                        * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
                );
            }
            labels.push(k);
        }
    }
    (
        DenseMatrix::new(labels.len(), dim, values).expect("sized"),
        labels,
    )
}

/// Clean samples in one diffuse cloud plus poisoned samples in tight
/// per-trigger clusters offset from it.
#[derive(Debug, Clone, Copy)]
pub struct PoisonScenario {
    pub clean: usize,
    pub poisoned: usize,
    pub triggers: usize,
    pub dim: usize,
    /// Per-coordinate std of the clean cloud.
    pub clean_std: f64,
    /// Distance from the clean mean to the centre of the trigger clusters.
    pub offset: f64,
    /// Distance of each trigger centre from the common poison centre.
    pub trigger_radius: f64,
    /// Per-coordinate std inside a trigger cluster.
    pub trigger_std: f64,
    pub seed: u64,
}

impl Default for PoisonScenario {
    fn default() -> Self {
        Self {
            clean: 2000,
            poisoned: 300,
            triggers: 6,
            dim: 768,
            clean_std: 1.0,
            offset: 40.0,
            trigger_radius: 12.0,
            trigger_std: 0.05,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub matrix: DenseMatrix,
    pub poisoned: Vec<bool>,
    /// Trigger index for poisoned rows, `None` for clean rows.
    pub trigger: Vec<Option<usize>>,
    /// Smallest distance between two trigger centres.
    pub min_center_separation: f64,
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut v = normal_vec(rng, d, 1.0);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

impl PoisonScenario {
    /// Rows are shuffled so clean and poisoned samples interleave.
    pub fn generate(&self) -> ScenarioData {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.dim;
        let direction = unit_vec(&mut rng, d);
        let centres: Vec<Vec<f64>> = (0..self.triggers)
            .map(|_| {
                let u = unit_vec(&mut rng, d);
                direction
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| self.offset * a + self.trigger_radius * b)
                    .collect()
            })
            .collect();
        let mut min_sep = f64::INFINITY;
        for i in 0..centres.len() {
            for j in i + 1..centres.len() {
                let s = crate::matrix::sq_dist(&centres[i], &centres[j]).sqrt();
                min_sep = min_sep.min(s);
            }
        }

        let mut rows: Vec<(Vec<f64>, Option<usize>)> =
            Vec::with_capacity(self.clean + self.poisoned);
        for _ in 0..self.clean {
            rows.push((normal_vec(&mut rng, d, self.clean_std), None));
        }
        for k in 0..self.poisoned {
            let t = k % self.triggers.max(1);
            let noise = normal_vec(&mut rng, d, self.trigger_std);
            let row = centres[t].iter().zip(&noise).map(|(c, e)| c + e).collect();
            rows.push((row, Some(t)));
        }
        rows.shuffle(&mut rng);

        let trigger: Vec<Option<usize>> = rows.iter().map(|(_, t)| *t).collect();
        let values: Vec<f64> = rows.into_iter().flat_map(|(r, _)| r).collect();
        ScenarioData {
            matrix: DenseMatrix::new(trigger.len(), d, values).expect("sized"),
            poisoned: trigger.iter().map(Option::is_some).collect(),
            trigger,
            min_center_separation: min_sep,
        }
    }
}

/// One diffuse cloud with independent random poison flags at `poison_rate`.
pub fn null_scenario(
    n: usize,
    dim: usize,
    poison_rate: f64,
    seed: u64,
) -> (DenseMatrix, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = normal_vec(&mut rng, n * dim, 1.0);
    let mut flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(poison_rate)).collect();
    // Labeled mode needs at least one of each.
    flags[0] = true;
    flags[n - 1] = false;
    (DenseMatrix::new(n, dim, values).expect("sized"), flags)
}

/// A tensor-store file holding every attention parameter the profile names
/// for `arch`, drawn from `N(0, std^2)` and stored as F32.
pub fn synthetic_checkpoint(
    arch: &ArchKind,
    profile: &NamingProfile,
    std: f64,
    seed: u64,
) -> Vec<u8> {
    let tensors = synthetic_tensors(arch, profile, std, seed);
    let writes: Vec<TensorWrite> = tensors
        .iter()
        .map(|(name, shape, values)| TensorWrite {
            name,
            dtype: DType::F32,
            shape: shape.clone(),
            values,
        })
        .collect();
    write_tensor_store_bytes(&writes)
}

/// Same tensors as [`synthetic_checkpoint`], before serialisation. Values are
/// rounded through `f32` so they survive a store round trip unchanged.
pub fn synthetic_tensors(
    arch: &ArchKind,
    profile: &NamingProfile,
    std: f64,
    seed: u64,
) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("valid std");
    let kinds: Vec<ParamKind> = ParamKind::ALL
        .into_iter()
        .filter(|k| profile.permits(*k))
        .collect();
    let refs = enumerate_refs(arch, &LayerSelection::All, &kinds).expect("arch is valid");
    refs.iter()
        .map(|r| {
            let name = profile.tensor_name(r).expect("profile covers arch");
            let shape = match r.kind {
                ParamKind::Weight => vec![arch.hidden_dim, arch.hidden_dim],
                ParamKind::Bias => vec![arch.hidden_dim],
            };
            let count = shape.iter().product();
            let values = (0..count)
                .map(|_| f64::from(normal.sample(&mut rng) as f32))
                .collect();
            (name, shape, values)
        })
        .collect()
}
