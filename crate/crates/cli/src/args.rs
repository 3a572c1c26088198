use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tetot_core::{NormalizationMode, SampleCount, SolverKind, TetotConfig};

const FORMATS: &str = "\
File formats (all little-endian):
  EMB1  embeddings   'TETOTEMB', u32 version=1, u32 dtype=1 (f32), u64 n, u64 dim, n*dim f32 row-major
  LBL   labels       sidecar '<stem>.lbl' next to an EMB1 file: 'TETOTLBL', u32 version=1, u64 n,
                     u32 num_classes, n i64 labels (-1 = unlabeled)
  HED1  head         'TETOTHED', u32 version=1, u64 K, u64 dim, K*dim f32 weights, K f32 bias
  STA1  statistics   'TETOTSTA', u32 version=1, u64 dim, u64 count, dim f64 mean, dim*dim f64 covariance
  CSV   embeddings   files ending in .csv: one row per sample, optional header; a final header
                     column named 'label' holds integer labels (-1 = unlabeled)

Manifest (--manifest): JSON array of
  {\"candidate_id\": str, \"source\": path, \"target\": path, \"head\": path, \"accuracy\": float?}
Relative paths are resolved against the manifest's directory. For `approx`, a source ending in
.sta is read as STA1 statistics.

Output: one JSON record on stdout (or --out), a short summary on stderr.
Exit codes: 0 success, 1 input or usage error, 2 malformed file.";

#[derive(Debug, Parser)]
#[command(name = "tetot", version, about = "Optimal-transport transferability scores", after_long_help = FORMATS)]
pub struct Cli {
    /// Write the JSON record here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label-aware OT score between a labeled source and an unlabeled target.
    Compute {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        metric: MetricArgs,
    },
    /// Gaussian closed-form score from source embeddings or an STA1 file.
    Approx(ApproxArgs),
    /// Mean prediction entropy of the head on the target.
    Entropy(HeadArgs),
    /// Head accuracy on a labeled target.
    Accuracy(HeadArgs),
    /// Write source mean and covariance as STA1.
    Stats {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        stats_out: PathBuf,
    },
    /// Score every manifest candidate and rank them best-first.
    Rank(BatchArgs),
    /// Correlate manifest scores with accuracy, per target and pooled.
    Correlate(BatchArgs),
    /// Write synthetic domains, a head, and a manifest.
    GenFixtures(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeadArgs {
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Weight on the label cost.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value = "l2", value_parser = parse_norm)]
    pub norm: NormalizationMode,
    /// Positive integer or "all".
    #[arg(long, default_value = "all", value_parser = parse_count)]
    pub num_source: SampleCount,
    /// Positive integer or "all".
    #[arg(long, default_value = "all", value_parser = parse_count)]
    pub num_target: SampleCount,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Solver::Exact)]
    pub solver: Solver,
    /// Sinkhorn regularization (default 0.01 * mean cost).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Use argmax one-hot pseudo-labels.
    #[arg(long)]
    pub hard_pseudo_labels: bool,
    /// Ridge added to covariances in the Gaussian variant.
    #[arg(long, default_value_t = 0.0)]
    pub cov_jitter: f64,
}

impl MetricArgs {
    pub fn config(&self) -> TetotConfig {
        TetotConfig {
            lambda: self.lambda,
            norm_mode: self.norm,
            num_source: self.num_source,
            num_target: self.num_target,
            seed: self.seed,
            solver: match self.solver {
                Solver::Exact => SolverKind::Exact,
                Solver::Sinkhorn => SolverKind::Sinkhorn,
            },
            epsilon: self.epsilon,
            hard_pseudo_labels: self.hard_pseudo_labels,
            cov_jitter: self.cov_jitter,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Solver {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Tetot,
    Approx,
    Entropy,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    /// Source embeddings.
    #[arg(long, alias = "source", conflicts_with = "source_stats", required_unless_present = "source_stats")]
    pub source_emb: Option<PathBuf>,
    /// Precomputed STA1 source statistics.
    #[arg(long)]
    pub source_stats: Option<PathBuf>,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value = "all", value_parser = parse_count)]
    pub num_target: SampleCount,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub cov_jitter: f64,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = Metric::Tetot)]
    pub metric: Metric,
    #[command(flatten)]
    pub metric_args: MetricArgs,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// Comma-separated shift magnitudes.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2,2.5,3,3.5,4,4.5")]
    pub shifts: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub n_per_domain: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_norm(s: &str) -> Result<NormalizationMode, String> {
    s.parse().map_err(|e: tetot_core::TetotError| e.to_string())
}

fn parse_count(s: &str) -> Result<SampleCount, String> {
    s.parse().map_err(|e: tetot_core::TetotError| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_defaults() {
        let cli = Cli::try_parse_from(["tetot", "compute", "--source", "s", "--target", "t", "--head", "h"]).unwrap();
        let Command::Compute { metric, .. } = cli.command else { panic!("wrong subcommand") };
        assert_eq!(metric.config(), TetotConfig::default());
    }

    #[test]
    fn approx_needs_exactly_one_source() {
        assert!(Cli::try_parse_from(["tetot", "approx", "--target", "t"]).is_err());
        assert!(Cli::try_parse_from(["tetot", "approx", "--target", "t", "--source", "s", "--source-stats", "x"]).is_err());
        assert!(Cli::try_parse_from(["tetot", "approx", "--target", "t", "--source", "s"]).is_ok());
    }

    #[test]
    fn parses_counts_and_shifts() {
        let cli = Cli::try_parse_from(["tetot", "rank", "--manifest", "m", "--num-source", "40", "--norm", "zscore"]).unwrap();
        let Command::Rank(b) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(b.metric_args.num_source, SampleCount::Count(40));
        assert_eq!(b.metric_args.norm, NormalizationMode::ZscorePerDomain);
        assert!(Cli::try_parse_from(["tetot", "rank", "--manifest", "m", "--num-source", "0"]).is_err());
        let cli = Cli::try_parse_from(["tetot", "gen-fixtures", "--out-dir", "d", "--shifts", "0,1.5"]).unwrap();
        let Command::GenFixtures(f) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(f.shifts, vec![0.0, 1.5]);
    }
}
