//! Random instance generators shared by the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tetot_core::{ClassifierHead, CostMatrix, EmbeddingSet};

pub fn random_cost(m: usize, n: usize, seed: u64) -> CostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CostMatrix::new(Array2::from_shape_fn((m, n), |_| rng.random::<f64>())).expect("valid cost")
}

pub fn random_labeled(n: usize, dim: usize, k: usize, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, dim), |_| rng.random::<f64>() - 0.5);
    EmbeddingSet::labeled(x, (0..n).map(|i| i % k).collect(), k, format!("bench-{seed}"))
        .expect("valid set")
}

pub fn random_head(k: usize, dim: usize, seed: u64) -> ClassifierHead {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array2::from_shape_fn((k, dim), |_| rng.random::<f64>() - 0.5);
    ClassifierHead::new(w, vec![0.0; k].into()).expect("valid head")
}
