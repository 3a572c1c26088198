//! Correlating scores with accuracy and selecting among candidates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TetotError};
use crate::report::{MetricName, MetricReport};

/// One selectable option (an architecture, a source domain, ...) with its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub metric: MetricReport,
    #[serde(default)]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

impl Direction {
    /// Ranking direction for a metric: distances and entropy are "lower is
    /// better", accuracy is "higher is better".
    pub fn for_metric(name: MetricName) -> Self {
        match name {
            MetricName::Accuracy => Direction::HigherIsBetter,
            _ => Direction::LowerIsBetter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rho: f64,
    pub n_points: usize,
    pub metric_name: String,
    /// `(metric value, accuracy)` for every point, in input order.
    pub pairs: Vec<(f64, f64)>,
}

/// Pearson correlation with population (divide-by-n) moments.
///
/// Constant inputs have no defined correlation and are reported as an error
/// rather than NaN.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(TetotError::Input(format!(
            "pearson needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(TetotError::Input("pearson needs at least 2 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(TetotError::Input("pearson inputs must be finite".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        let which = if sxx == 0.0 { "xs" } else { "ys" };
        return Err(TetotError::UndefinedCorrelation(format!("{which} is constant")));
    }
    let cov = sxy / n;
    let rho = cov / ((sxx / n).sqrt() * (syy / n).sqrt());
    Ok(rho.clamp(-1.0, 1.0))
}

/// Candidate ids ordered best-first; ties broken by id. The first entry is
/// the selection.
pub fn rank_candidates(batch: &[Candidate], direction: Direction) -> Vec<String> {
    let mut order: Vec<&Candidate> = batch.iter().collect();
    order.sort_by(|a, b| {
        let by_value = a.metric.value.total_cmp(&b.metric.value);
        let by_value = match direction {
            Direction::LowerIsBetter => by_value,
            Direction::HigherIsBetter => by_value.reverse(),
        };
        by_value.then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    order.into_iter().map(|c| c.candidate_id.clone()).collect()
}

fn check_unique(batch: &[Candidate]) -> Result<()> {
    let mut seen = HashSet::new();
    for c in batch {
        if !seen.insert(c.candidate_id.as_str()) {
            return Err(TetotError::Input(format!("duplicate candidate id '{}'", c.candidate_id)));
        }
    }
    Ok(())
}

/// Pearson correlation between candidates' metric values and accuracies.
pub fn correlate_with_accuracy(batch: &[Candidate], metric_name: &str) -> Result<CorrelationReport> {
    check_unique(batch)?;
    let pairs = batch
        .iter()
        .map(|c| {
            c.accuracy.map(|a| (c.metric.value, a)).ok_or_else(|| {
                TetotError::Input(format!("candidate '{}' has no accuracy", c.candidate_id))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let rho = pearson(&xs, &ys)?;
    Ok(CorrelationReport {
        rho,
        n_points: pairs.len(),
        metric_name: metric_name.to_string(),
        pairs,
    })
}

/// Correlation reported both per group and pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedCorrelation {
    /// `(group id, report)` for every group that has a defined correlation.
    pub per_group: Vec<(String, CorrelationReport)>,
    /// Mean of the per-group ρ values, if any group qualified.
    pub mean_rho: Option<f64>,
    /// One ρ over all points of all groups.
    pub pooled: CorrelationReport,
}

/// Per-group correlations (skipping groups where ρ is undefined), their
/// mean, and the pooled correlation.
pub fn correlate_grouped(
    groups: &[(String, Vec<Candidate>)],
    metric_name: &str,
) -> Result<GroupedCorrelation> {
    let mut per_group = Vec::new();
    for (id, batch) in groups {
        if batch.len() < 2 {
            continue;
        }
        match correlate_with_accuracy(batch, metric_name) {
            Ok(r) => per_group.push((id.clone(), r)),
            Err(TetotError::UndefinedCorrelation(why)) => {
                log::warn!("group '{id}': correlation undefined ({why}); skipped");
            }
            Err(e) => return Err(e),
        }
    }
    let mean_rho = (!per_group.is_empty())
        .then(|| per_group.iter().map(|(_, r)| r.rho).sum::<f64>() / per_group.len() as f64);
    let all: Vec<Candidate> = groups
        .iter()
        .flat_map(|(g, batch)| {
            batch.iter().map(move |c| Candidate {
                candidate_id: format!("{g}/{}", c.candidate_id),
                ..c.clone()
            })
        })
        .collect();
    let pooled = correlate_with_accuracy(&all, metric_name)?;
    Ok(GroupedCorrelation { per_group, mean_rho, pooled })
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cand(id: &str, value: f64, acc: Option<f64>) -> Candidate {
        Candidate {
            candidate_id: id.into(),
            metric: MetricReport::new(MetricName::Tetot, value),
            accuracy: acc,
        }
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(TetotError::UndefinedCorrelation(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[3.0, 3.0]), Err(TetotError::UndefinedCorrelation(_))));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(TetotError::Input(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(TetotError::Input(_))));
    }

    #[test]
    fn ranking_examples() {
        let batch = [cand("a", 0.3, None), cand("b", 0.1, None), cand("c", 0.2, None)];
        assert_eq!(rank_candidates(&batch, Direction::LowerIsBetter), ["b", "c", "a"]);
        assert_eq!(rank_candidates(&batch, Direction::HigherIsBetter), ["a", "c", "b"]);
        assert_eq!(rank_candidates(&batch[..1], Direction::LowerIsBetter), ["a"]);
        let tie = [cand("z", 1.0, None), cand("m", 1.0, None)];
        assert_eq!(rank_candidates(&tie, Direction::LowerIsBetter), ["m", "z"]);
        assert_eq!(rank_candidates(&tie, Direction::HigherIsBetter), ["m", "z"]);
    }

    #[test]
    fn affine_anti_relation() {
        let batch: Vec<Candidate> = [0.9, 0.7, 0.4, 0.55]
            .iter()
            .enumerate()
            .map(|(i, &acc)| cand(&format!("c{i}"), 1.0 - acc, Some(acc)))
            .collect();
        let r = correlate_with_accuracy(&batch, "tetot").unwrap();
        assert!((r.rho + 1.0).abs() < 1e-12);
        assert_eq!(r.n_points, 4);
        assert_eq!(r.pairs[2], (1.0 - 0.4, 0.4));
    }

    #[test]
    fn missing_accuracy_and_duplicate_ids() {
        let batch = [cand("a", 0.1, Some(0.5)), cand("b", 0.2, None)];
        assert!(correlate_with_accuracy(&batch, "tetot").is_err());
        let dup = [cand("a", 0.1, Some(0.5)), cand("a", 0.2, Some(0.4))];
        assert!(correlate_with_accuracy(&dup, "tetot").is_err());
    }

    #[test]
    fn independent_uniforms_are_uncorrelated() {
        // |rho| < 0.3 at n = 100 should fail with probability well under 1%.
        let mut failures = 0;
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..100).map(|_| rng.random()).collect();
            let ys: Vec<f64> = (0..100).map(|_| rng.random()).collect();
            if pearson(&xs, &ys).unwrap().abs() >= 0.3 {
                failures += 1;
            }
        }
        assert!(failures <= 2, "{failures} of 200 null draws exceeded 0.3");
    }

    #[test]
    fn grouped_reports_mean_and_pooled() {
        let g1 = vec![cand("a", 0.1, Some(0.9)), cand("b", 0.3, Some(0.6))];
        let g2 = vec![cand("a", 0.2, Some(0.8)), cand("b", 0.5, Some(0.2)), cand("c", 0.4, Some(0.5))];
        let g3 = vec![cand("a", 0.2, Some(0.5)), cand("b", 0.4, Some(0.5))];
        let r = correlate_grouped(
            &[("t1".into(), g1), ("t2".into(), g2), ("t3".into(), g3)],
            "tetot",
        )
        .unwrap();
        assert_eq!(r.per_group.len(), 2);
        let mean = (r.per_group[0].1.rho + r.per_group[1].1.rho) / 2.0;
        assert_eq!(r.mean_rho, Some(mean));
        assert_eq!(r.pooled.n_points, 7);
    }

    proptest! {
        #[test]
        fn affine_equivariance(
            xs in proptest::collection::vec(-10.0f64..10.0, 3..30),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -5.0f64..5.0,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = xs.iter().map(|_| rng.random::<f64>()).collect();
            let Ok(base) = pearson(&xs, &ys) else { return Ok(()); };
            let tx: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let r = pearson(&tx, &ys).unwrap();
            prop_assert!((r - a.signum() * base).abs() <= 1e-12);
            prop_assert!(r.abs() <= 1.0);
        }

        #[test]
        fn ranking_invariant_under_monotone_maps(values in proptest::collection::vec(0.0f64..10.0, 1..20)) {
            let batch: Vec<Candidate> = values.iter().enumerate()
                .map(|(i, &v)| cand(&format!("c{i:02}"), v, None)).collect();
            let squared: Vec<Candidate> = batch.iter()
                .map(|c| cand(&c.candidate_id, c.metric.value.sqrt(), None)).collect();
            let r1 = rank_candidates(&batch, Direction::LowerIsBetter);
            prop_assert_eq!(&r1, &rank_candidates(&squared, Direction::LowerIsBetter));
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let first = batch.iter().find(|c| c.candidate_id == r1[0]).unwrap();
            prop_assert_eq!(first.metric.value, min);
        }
    }
}
