//! Target-only and ground-truth reference scores.

use crate::data::{argmax, ClassifierHead, EmbeddingSet};
use crate::error::Result;
use crate::report::{MetricName, MetricReport};

/// Mean Shannon entropy (nats) of the head's softmax outputs on `tgt`.
///
/// Computed on raw features; `0 · ln 0` counts as 0.
pub fn prediction_entropy(head: &ClassifierHead, tgt: &EmbeddingSet) -> Result<MetricReport> {
    let probs = head.probabilities(tgt)?;
    let total: f64 = probs
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .filter(|&&p| p > 0.0)
                .fold(0.0, |acc, &p| acc - p * p.ln())
        })
        .fold(0.0, |acc, h| acc + h);
    let value = total / tgt.n_samples() as f64;
    Ok(MetricReport::new(MetricName::Entropy, value)
        .with("n", tgt.n_samples())
        .with("num_classes", head.num_classes())
        .with("domain", tgt.domain_id()))
}

/// Fraction of samples whose argmax logit (lowest index on ties) equals the
/// true label.
pub fn transferability_ground_truth(
    head: &ClassifierHead,
    labeled: &EmbeddingSet,
) -> Result<MetricReport> {
    let labels = labeled.require_labels("accuracy")?;
    let logits = head.logits(labeled)?;
    let correct = logits
        .rows()
        .into_iter()
        .zip(&labels)
        .filter(|(row, &y)| argmax(row.view()) == y)
        .count();
    let value = correct as f64 / labels.len() as f64;
    Ok(MetricReport::new(MetricName::Accuracy, value)
        .with("n", labels.len())
        .with("correct", correct)
        .with("domain", labeled.domain_id()))
}
