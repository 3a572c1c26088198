//! Transport-based transferability score.
//!
//! The ground cost between a labeled source sample `(x_s, y_s)` and a target
//! sample `x_t` is
//!
//! ```text
//! c = ‖g(x_s) - g(x_t)‖₂ + λ · ‖onehot(y_s) - softmax(h(g(x_t)))‖₂
//! ```
//!
//! and the score is the optimal transport cost under uniform marginals.
//! Feature distances use normalized embeddings; the head always sees raw
//! embeddings because it was trained on them.

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::data::{
    argmax, normalize_features, subsample_stream, ClassifierHead, EmbeddingSet, SampleCount,
    SolverKind, TetotConfig,
};
use crate::error::{Result, TetotError};
use crate::ot::{solve_exact, CostMatrix, OtResult, SinkhornParams, Weights};
use crate::report::{MetricName, MetricReport};

/// Soft target labels: one probability row per target sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelMatrix(Array2<f64>);

impl PseudoLabelMatrix {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(TetotError::Input("pseudo-label entries must lie in [0, 1]".into()));
        }
        if let Some(i) = probs
            .rows()
            .into_iter()
            .position(|r| (r.sum() - 1.0).abs() > 1e-9)
        {
            return Err(TetotError::Input(format!("pseudo-label row {i} does not sum to 1")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    /// Replaces every row by the one-hot vector of its argmax.
    pub fn hardened(&self) -> Self {
        let mut out = Array2::zeros(self.0.dim());
        for (i, row) in self.0.rows().into_iter().enumerate() {
            out[(i, argmax(row))] = 1.0;
        }
        Self(out)
    }
}

/// Hard source labels over `num_classes` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotLabels {
    labels: Vec<usize>,
    num_classes: usize,
}

impl OneHotLabels {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(TetotError::Input(format!(
                "source label {l} is outside the head's {num_classes} classes"
            )));
        }
        Ok(Self { labels, num_classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn to_matrix(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.labels.len(), self.num_classes));
        for (i, &l) in self.labels.iter().enumerate() {
            out[(i, l)] = 1.0;
        }
        out
    }
}

/// Fills an `m × n` matrix row by row in parallel. Each entry depends only on
/// its own `(i, j)`, so the result does not depend on the thread count.
fn par_fill(m: usize, n: usize, entry: impl Fn(usize, usize) -> f64 + Sync) -> Array2<f64> {
    let mut data = vec![0.0; m * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = entry(i, j);
        }
    });
    Array2::from_shape_vec((m, n), data).expect("m*n entries")
}

/// Euclidean distances between every source and target embedding.
pub fn feature_cost_matrix(src: &EmbeddingSet, tgt: &EmbeddingSet) -> Result<CostMatrix> {
    if src.dim() != tgt.dim() {
        return Err(TetotError::Input(format!(
            "source dim {} differs from target dim {}",
            src.dim(),
            tgt.dim()
        )));
    }
    let (xs, ys) = (src.features(), tgt.features());
    let entries = par_fill(src.n_samples(), tgt.n_samples(), |i, j| {
        Zip::from(xs.row(i))
            .and(ys.row(j))
            .fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
            .sqrt()
    });
    CostMatrix::new(entries)
}

/// Softmax outputs of `head` on the raw target embeddings.
pub fn pseudo_label(head: &ClassifierHead, tgt: &EmbeddingSet) -> Result<PseudoLabelMatrix> {
    Ok(PseudoLabelMatrix(head.probabilities(tgt)?))
}

/// `‖onehot_i - probs_j‖₂` for every source/target pair.
pub fn label_cost_matrix(
    src_labels: &OneHotLabels,
    tgt_probs: &PseudoLabelMatrix,
) -> Result<CostMatrix> {
    if src_labels.num_classes() != tgt_probs.num_classes() {
        return Err(TetotError::Input(format!(
            "source labels have {} classes, pseudo-labels have {}",
            src_labels.num_classes(),
            tgt_probs.num_classes()
        )));
    }
    let probs = tgt_probs.probs();
    let labels = src_labels.labels();
    let entries = par_fill(labels.len(), probs.nrows(), |i, j| {
        probs
            .row(j)
            .iter()
            .enumerate()
            .map(|(c, &p)| {
                let d = if c == labels[i] { 1.0 - p } else { p };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    });
    CostMatrix::new(entries)
}

/// `C_features + λ · C_labels`, entrywise.
pub fn combine_costs(features: &CostMatrix, labels: &CostMatrix, lambda: f64) -> Result<CostMatrix> {
    if features.dim() != labels.dim() {
        return Err(TetotError::Input(format!(
            "cost shapes differ: {:?} vs {:?}",
            features.dim(),
            labels.dim()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(TetotError::Input(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut out = features.entries().clone();
    out.zip_mut_with(labels.entries(), |f, &l| *f += lambda * l);
    CostMatrix::new(out)
}

fn draw(set: &EmbeddingSet, count: SampleCount, seed: u64, stream: u64) -> EmbeddingSet {
    match count {
        SampleCount::All => set.clone(),
        SampleCount::Count(k) => subsample_stream(set, k, seed, stream),
    }
}

/// The combined cost matrix for `(src, tgt)` under `config`, after sampling
/// and normalization.
pub fn tetot_cost_matrix(
    src: &EmbeddingSet,
    tgt: &EmbeddingSet,
    head: &ClassifierHead,
    config: &TetotConfig,
) -> Result<CostMatrix> {
    config.validate()?;
    if src.dim() != tgt.dim() {
        return Err(TetotError::Input(format!(
            "source dim {} differs from target dim {}",
            src.dim(),
            tgt.dim()
        )));
    }
    head.check_dim(tgt)?;

    let src = draw(src, config.num_source, config.seed, 0);
    let tgt = draw(tgt, config.num_target, config.seed, 1);

    let label_part = if config.lambda > 0.0 {
        let labels = src.require_labels("label cost").map_err(|_| {
            TetotError::Input("label cost requires source labels (use lambda = 0 otherwise)".into())
        })?;
        let onehot = OneHotLabels::new(labels, head.num_classes())?;
        let mut probs = pseudo_label(head, &tgt)?;
        if config.hard_pseudo_labels {
            probs = probs.hardened();
        }
        Some(label_cost_matrix(&onehot, &probs)?)
    } else {
        None
    };

    let features = feature_cost_matrix(
        &normalize_features(&src, config.norm_mode),
        &normalize_features(&tgt, config.norm_mode),
    )?;
    match label_part {
        Some(labels) => combine_costs(&features, &labels, config.lambda),
        None => Ok(features),
    }
}

/// Solves uniform-marginal OT on `cost` with the configured solver.
pub fn solve_uniform(cost: &CostMatrix, config: &TetotConfig) -> Result<OtResult> {
    let a = Weights::uniform(cost.rows());
    let b = Weights::uniform(cost.cols());
    match config.solver {
        SolverKind::Exact => solve_exact(cost, &a, &b),
        SolverKind::Sinkhorn => SinkhornParams { epsilon: config.epsilon, ..Default::default() }
            .solve(cost, &a, &b),
    }
}

/// Transport-based transferability score of `head` from `src` to `tgt`.
///
/// Lower values predict higher target accuracy. Source labels are needed
/// only when `config.lambda > 0`; target labels are never used.
pub fn compute_tetot(
    src: &EmbeddingSet,
    tgt: &EmbeddingSet,
    head: &ClassifierHead,
    config: &TetotConfig,
) -> Result<MetricReport> {
    let cost = tetot_cost_matrix(src, tgt, head, config)?;
    let result = solve_uniform(&cost, config)?;
    let mut report = MetricReport::new(MetricName::Tetot, result.cost)
        .with("m", cost.rows())
        .with("n", cost.cols())
        .with("lambda", config.lambda)
        .with("norm_mode", config.norm_mode)
        .with("solver", result.solver_tag)
        .with("seed", config.seed)
        .with("iterations", result.iterations)
        .with("source", src.domain_id())
        .with("target", tgt.domain_id());
    if config.solver == SolverKind::Sinkhorn {
        report = report.with("converged", result.converged);
    }
    Ok(report)
}
