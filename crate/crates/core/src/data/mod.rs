//! Domain types, interchange formats, sampling and normalization.

mod config;
mod fixture;
pub(crate) mod io;
mod normalize;
mod sample;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Result, TetotError};

pub use config::{NormalizationMode, SampleCount, SolverKind, TetotConfig};
pub use fixture::{generate_synthetic_fixture, SyntheticFixture};
pub use io::{
    label_sidecar_path, load_classifier_head, load_embedding_set, save_classifier_head,
    save_embedding_set,
};
pub use normalize::normalize_features;
pub use sample::{subsample, subsample_stream};

/// Empirical distribution of one domain: encoder outputs and optional labels.
///
/// Labels are per-sample; `None` entries mark unlabeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    features: Array2<f64>,
    labels: Option<Vec<Option<usize>>>,
    num_classes: Option<usize>,
    domain_id: String,
}

impl EmbeddingSet {
    /// Builds an unlabeled set. Rejects empty shapes and non-finite entries.
    pub fn new(features: Array2<f64>, domain_id: impl Into<String>) -> Result<Self> {
        let (rows, cols) = features.dim();
        if rows == 0 || cols == 0 {
            return Err(TetotError::Input(format!(
                "embedding set must be non-empty, got {rows}x{cols}"
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(TetotError::Data(format!(
                "non-finite feature at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            features,
            labels: None,
            num_classes: None,
            domain_id: domain_id.into(),
        })
    }

    /// Attaches labels drawn from `[0, num_classes)`.
    pub fn with_labels(mut self, labels: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        if labels.len() != self.n_samples() {
            return Err(TetotError::Input(format!(
                "{} labels for {} samples",
                labels.len(),
                self.n_samples()
            )));
        }
        if num_classes == 0 {
            return Err(TetotError::Data("num_classes must be positive".into()));
        }
        if let Some((i, l)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&l| l >= num_classes).map(|l| (i, l)))
        {
            return Err(TetotError::Data(format!(
                "label {l} at sample {i} is outside [0, {num_classes})"
            )));
        }
        self.labels = Some(labels);
        self.num_classes = Some(num_classes);
        Ok(self)
    }

    /// Convenience for fully labeled sets.
    pub fn labeled(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        domain_id: impl Into<String>,
    ) -> Result<Self> {
        Self::new(features, domain_id)?
            .with_labels(labels.into_iter().map(Some).collect(), num_classes)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> Option<&[Option<usize>]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.num_classes
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    /// All labels, or an input error naming `purpose` if any sample is unlabeled.
    pub fn require_labels(&self, purpose: &str) -> Result<Vec<usize>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| TetotError::Input(format!("{purpose} requires labels")))?;
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| {
                    TetotError::Input(format!("{purpose} requires labels; sample {i} is unlabeled"))
                })
            })
            .collect()
    }

    /// Same rows and labels with new feature values of identical shape.
    pub(crate) fn with_features(&self, features: Array2<f64>) -> Self {
        debug_assert_eq!(features.dim(), self.features.dim());
        Self {
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            domain_id: self.domain_id.clone(),
        }
    }

    /// Rows at `indices`, in that order, with labels carried along.
    pub fn select(&self, indices: &[usize]) -> Self {
        let features = self.features.select(ndarray::Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self {
            features,
            labels,
            num_classes: self.num_classes,
            domain_id: self.domain_id.clone(),
        }
    }
}

/// Linear classifier head: `logits = weights · z + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl ClassifierHead {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        let (k, dim) = weights.dim();
        if k < 2 {
            return Err(TetotError::Input(format!("head needs at least 2 classes, got {k}")));
        }
        if dim == 0 {
            return Err(TetotError::Input("head dimension must be positive".into()));
        }
        if bias.len() != k {
            return Err(TetotError::Input(format!(
                "bias length {} does not match {k} classes",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(TetotError::Data("classifier head has non-finite entries".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub(crate) fn check_dim(&self, set: &EmbeddingSet) -> Result<()> {
        if set.dim() != self.dim() {
            return Err(TetotError::Input(format!(
                "head expects dim {}, embedding set '{}' has dim {}",
                self.dim(),
                set.domain_id(),
                set.dim()
            )));
        }
        Ok(())
    }

    /// Logits for every row of `set`, shape `n × K`.
    pub fn logits(&self, set: &EmbeddingSet) -> Result<Array2<f64>> {
        self.check_dim(set)?;
        let mut out = set.features().dot(&self.weights.t()).as_standard_layout().into_owned();
        out += &self.bias;
        Ok(out)
    }

    /// Row-wise softmax of the logits, computed with max subtraction.
    pub fn probabilities(&self, set: &EmbeddingSet) -> Result<Array2<f64>> {
        let mut logits = self.logits(set)?;
        for mut row in logits.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        Ok(logits)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite_features() {
        let err = EmbeddingSet::new(array![[1.0, f64::NAN]], "x").unwrap_err();
        assert!(matches!(err, TetotError::Data(_)));
    }

    #[test]
    fn rejects_out_of_range_label() {
        let set = EmbeddingSet::new(array![[1.0], [2.0]], "x").unwrap();
        let err = set.with_labels(vec![Some(0), Some(3)], 3).unwrap_err();
        assert!(matches!(err, TetotError::Data(_)));
    }

    #[test]
    fn require_labels_flags_unlabeled_samples() {
        let set = EmbeddingSet::new(array![[1.0], [2.0]], "x")
            .unwrap()
            .with_labels(vec![Some(0), None], 2)
            .unwrap();
        assert!(set.require_labels("test").is_err());
    }

    #[test]
    fn head_requires_two_classes() {
        assert!(ClassifierHead::new(array![[1.0, 2.0]], array![0.0]).is_err());
    }

    #[test]
    fn softmax_survives_large_logits() {
        let mut row = [1000.0, 0.0];
        softmax_in_place(&mut row);
        assert_eq!(row[0], 1.0);
        assert!(row[1] < 1e-300);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(array![1.0, 3.0, 3.0].view()), 1);
    }
}
