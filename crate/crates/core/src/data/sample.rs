use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EmbeddingSet;

/// Draws `min(k, n)` rows uniformly without replacement.
///
/// The same `(set, k, seed)` always selects the same rows in the same order.
/// Asking for more rows than exist returns every row (permuted) and logs a
/// warning.
pub fn subsample(set: &EmbeddingSet, k: usize, seed: u64) -> EmbeddingSet {
    subsample_stream(set, k, seed, 0)
}

/// Like [`subsample`], drawing from an independent ChaCha stream so that two
/// domains sampled with one seed do not share index sequences.
pub fn subsample_stream(set: &EmbeddingSet, k: usize, seed: u64, stream: u64) -> EmbeddingSet {
    assert!(k >= 1, "subsample size must be at least 1");
    let n = set.n_samples();
    if k > n {
        log::warn!(
            "requested {k} samples from '{}' which has {n}; using all of them",
            set.domain_id()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let indices = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
    set.select(&indices)
}
