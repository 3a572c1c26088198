//! Test-time transferability estimation with optimal transport.
//!
//! Given a frozen classifier (encoder outputs plus a linear head), the crate
//! scores how well the model will do on an unlabeled target domain by
//! measuring the optimal-transport distance between labeled source embeddings
//! and target embeddings augmented with the head's soft predictions.
//!
//! Layout:
//! - [`data`]: embedding sets, classifier heads, binary/CSV formats, sampling,
//!   normalization and a synthetic fixture generator.
//! - [`ot`]: exact (network simplex) and entropic (log-domain Sinkhorn)
//!   transport solvers, plus a permutation brute-force oracle.
//! - [`tetot`]: cost assembly and the transport-based transferability score.
//! - [`gaussian`]: the statistics-only closed-form 2-Wasserstein variant.
//! - [`baselines`]: prediction entropy and ground-truth accuracy.
//! - [`evaluation`]: Pearson correlation, ranking and selection.

#![forbid(unsafe_code)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod gaussian;
pub mod ot;
pub mod report;
pub mod tetot;

pub use baselines::{prediction_entropy, transferability_ground_truth};
pub use data::{
    generate_synthetic_fixture, load_classifier_head, load_embedding_set, normalize_features,
    save_classifier_head, save_embedding_set, subsample, ClassifierHead, EmbeddingSet,
    NormalizationMode, SampleCount, SolverKind, SyntheticFixture, TetotConfig,
};
pub use error::{Result, TetotError};
pub use evaluation::{
    correlate_grouped, correlate_with_accuracy, pearson, rank_candidates, Candidate,
    CorrelationReport, Direction, GroupedCorrelation,
};
pub use gaussian::{
    compute_tetot_approx, gaussian_stats, load_gaussian_stats, save_gaussian_stats, sym_psd_sqrt,
    w2_squared, GaussianStats,
};
pub use ot::{
    brute_force_oracle, solve_exact, solve_sinkhorn, verify_plan, CostMatrix, OtResult,
    SinkhornParams, TransportPlan, Weights,
};
pub use report::{MetricName, MetricReport};
pub use tetot::{
    combine_costs, compute_tetot, feature_cost_matrix, label_cost_matrix, pseudo_label,
    OneHotLabels, PseudoLabelMatrix,
};
