//! Synthetic domains with a known classifier, standing in for trained models.
//!
//! The source is a mixture of `K` isotropic Gaussian clusters whose means sit
//! on a sphere of radius [`CLUSTER_RADIUS`]. The head is the nearest-mean rule
//! written as a linear layer (`w_k = μ_k`, `b_k = -|μ_k|²/2`). Each target is
//! the same mixture translated by `s · u` for a fixed random unit vector `u`,
//! with per-sample noise inflated to `1 + NOISE_GROWTH · s`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ClassifierHead, EmbeddingSet};
use crate::baselines::transferability_ground_truth;
use crate::error::{Result, TetotError};

pub const CLUSTER_RADIUS: f64 = 3.0;
pub const NOISE_GROWTH: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub source: EmbeddingSet,
    pub targets: Vec<EmbeddingSet>,
    pub head: ClassifierHead,
    /// Head accuracy on each labeled target, in `shift_levels` order.
    pub true_accuracies: Vec<f64>,
    pub shift_levels: Vec<f64>,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

fn sample_domain(
    rng: &mut ChaCha8Rng,
    means: &Array2<f64>,
    offset: &Array1<f64>,
    noise: f64,
    n: usize,
    domain_id: String,
) -> Result<EmbeddingSet> {
    let (k, dim) = means.dim();
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let y = i % k;
        for (d, v) in row.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *v = means[(y, d)] + offset[d] + noise * eps;
        }
        labels.push(y);
    }
    EmbeddingSet::labeled(features, labels, k, domain_id)
}

/// Builds a labeled source, one labeled target per shift level, the head, and
/// the head's accuracy on every target. Bit-identical for a fixed seed.
pub fn generate_synthetic_fixture(
    dim: usize,
    num_classes: usize,
    shift_levels: &[f64],
    n_per_domain: usize,
    seed: u64,
) -> Result<SyntheticFixture> {
    if dim < 2 || num_classes < 2 || n_per_domain < 50 {
        return Err(TetotError::Input(format!(
            "fixture needs dim >= 2, K >= 2, n_per_domain >= 50 (got {dim}, {num_classes}, {n_per_domain})"
        )));
    }
    if let Some(s) = shift_levels.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(TetotError::Input(format!("shift levels must be finite and >= 0, got {s}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Array2::zeros((num_classes, dim));
    for mut row in means.rows_mut() {
        row.assign(&(unit_vector(&mut rng, dim) * CLUSTER_RADIUS));
    }
    let direction = unit_vector(&mut rng, dim);
    let bias: Array1<f64> = means.rows().into_iter().map(|m| -0.5 * m.dot(&m)).collect();
    let head = ClassifierHead::new(means.clone(), bias)?;

    let zero = Array1::zeros(dim);
    let source = sample_domain(&mut rng, &means, &zero, 1.0, n_per_domain, "source".into())?;
    let mut targets = Vec::with_capacity(shift_levels.len());
    let mut true_accuracies = Vec::with_capacity(shift_levels.len());
    for (t, &shift) in shift_levels.iter().enumerate() {
        let offset = &direction * shift;
        let noise = 1.0 + NOISE_GROWTH * shift;
        let target = sample_domain(&mut rng, &means, &offset, noise, n_per_domain, format!("target_{t:02}"))?;
        true_accuracies.push(transferability_ground_truth(&head, &target)?.value);
        targets.push(target);
    }

    Ok(SyntheticFixture {
        source,
        targets,
        head,
        true_accuracies,
        shift_levels: shift_levels.to_vec(),
    })
}
