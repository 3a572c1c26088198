use ndarray::Axis;

use super::{EmbeddingSet, NormalizationMode};

/// Rescales features using statistics of `set` alone.
///
/// Zero rows (L2) and constant columns (z-score) are left unscaled with a
/// warning; they legitimately arise from dead units.
pub fn normalize_features(set: &EmbeddingSet, mode: NormalizationMode) -> EmbeddingSet {
    let mut features = set.features().clone();
    match mode {
        NormalizationMode::None => {}
        NormalizationMode::L2PerSample => {
            let mut zero_rows = 0usize;
            for mut row in features.rows_mut() {
                let norm = row.dot(&row).sqrt();
                if norm > 0.0 {
                    row.mapv_inplace(|v| v / norm);
                } else {
                    zero_rows += 1;
                }
            }
            if zero_rows > 0 {
                log::warn!(
                    "{zero_rows} zero-norm rows in '{}' left unnormalized",
                    set.domain_id()
                );
            }
        }
        NormalizationMode::ZscorePerDomain => {
            let n = features.nrows() as f64;
            let mut flat_cols = 0usize;
            for mut col in features.axis_iter_mut(Axis(1)) {
                let mean = col.sum() / n;
                col.mapv_inplace(|v| v - mean);
                let var = col.iter().map(|v| v * v).sum::<f64>() / n;
                let std = var.sqrt();
                if std > 0.0 {
                    col.mapv_inplace(|v| v / std);
                } else {
                    flat_cols += 1;
                }
            }
            if flat_cols > 0 {
                log::warn!(
                    "{flat_cols} zero-variance columns in '{}' centered but not scaled",
                    set.domain_id()
                );
            }
        }
    }
    set.with_features(features)
}
