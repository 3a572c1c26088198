//! Statistics-only variant: squared 2-Wasserstein distance between Gaussian
//! fits of the two domains,
//!
//! ```text
//! W₂² = ‖μ_S − μ_T‖² + tr(Σ_S + Σ_T − 2 (Σ_S^½ Σ_T Σ_S^½)^½)
//! ```
//!
//! Only the source mean and covariance are needed, so a deployed model can
//! ship an STA1 file instead of its training data.

mod linalg;

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::data::io::ByteReader;
use crate::data::{subsample_stream, EmbeddingSet, SampleCount, TetotConfig};
use crate::error::{Result, TetotError};
use crate::report::{MetricName, MetricReport};

pub use linalg::{jacobi_eigen, sym_psd_sqrt};

const STA_MAGIC: &[u8; 8] = b"TETOTSTA";
const STA_VERSION: u32 = 1;

/// Mean and (divide-by-n) covariance of one domain's embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: Array1<f64>,
    cov: Array2<f64>,
    count: usize,
}

impl GaussianStats {
    pub fn new(mean: Array1<f64>, cov: Array2<f64>, count: usize) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.dim() != (d, d) {
            return Err(TetotError::Input(format!(
                "mean of length {d} with covariance {:?}",
                cov.dim()
            )));
        }
        if count < 2 {
            return Err(TetotError::Input(format!("stats need at least 2 samples, got {count}")));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(TetotError::Data("non-finite mean or covariance".into()));
        }
        if linalg::asymmetry(&cov) > linalg::SYMMETRY_TOL {
            return Err(TetotError::Data("covariance is not symmetric".into()));
        }
        Ok(Self { mean, cov, count })
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Array2<f64> {
        &self.cov
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Adds `delta · I` to the covariance.
    pub fn with_jitter(mut self, delta: f64) -> Self {
        if delta > 0.0 {
            self.cov.diag_mut().mapv_inplace(|v| v + delta);
        }
        self
    }
}

/// Sample mean and `1/n` covariance of the rows of `set`.
pub fn gaussian_stats(set: &EmbeddingSet) -> Result<GaussianStats> {
    let n = set.n_samples();
    if n < 2 {
        return Err(TetotError::Input(format!(
            "gaussian stats need at least 2 samples, '{}' has {n}",
            set.domain_id()
        )));
    }
    let x = set.features();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = x - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    GaussianStats::new(mean, linalg::symmetrize(&cov), n)
}

/// Closed-form squared 2-Wasserstein distance between two Gaussians.
pub fn w2_squared(s: &GaussianStats, t: &GaussianStats) -> Result<f64> {
    if s.dim() != t.dim() {
        return Err(TetotError::Input(format!(
            "stats dims differ: {} vs {}",
            s.dim(),
            t.dim()
        )));
    }
    let diff = &s.mean - &t.mean;
    let mean_term = diff.dot(&diff);

    let root_s = sym_psd_sqrt(&s.cov)?;
    let middle = linalg::symmetrize(&root_s.dot(&t.cov).dot(&root_s));
    let cross = sym_psd_sqrt(&middle)?;
    let trace_s = s.cov.diag().sum();
    let trace_t = t.cov.diag().sum();
    let value = mean_term + trace_s + trace_t - 2.0 * cross.diag().sum();

    let scale = (mean_term + trace_s + trace_t).max(1.0);
    if value < -1e-8 * scale {
        return Err(TetotError::Solver(format!("W2² evaluated to {value}")));
    }
    Ok(value.max(0.0))
}

/// Gaussian-approximate score from source statistics and raw target
/// embeddings. No feature normalization and no label cost are involved.
pub fn compute_tetot_approx(
    src_stats: &GaussianStats,
    tgt: &EmbeddingSet,
    config: &TetotConfig,
) -> Result<MetricReport> {
    config.validate()?;
    if src_stats.dim() != tgt.dim() {
        return Err(TetotError::Input(format!(
            "source stats dim {} differs from target dim {}",
            src_stats.dim(),
            tgt.dim()
        )));
    }
    let tgt = match config.num_target {
        SampleCount::All => tgt.clone(),
        SampleCount::Count(k) => subsample_stream(tgt, k, config.seed, 1),
    };
    let tgt_stats = gaussian_stats(&tgt)?.with_jitter(config.cov_jitter);
    let src_stats = src_stats.clone().with_jitter(config.cov_jitter);
    let value = w2_squared(&src_stats, &tgt_stats)?;
    Ok(MetricReport::new(MetricName::TetotApprox, value)
        .with("source_count", src_stats.count())
        .with("n", tgt_stats.count())
        .with("dim", tgt_stats.dim())
        .with("cov_jitter", config.cov_jitter)
        .with("seed", config.seed)
        .with("target", tgt.domain_id()))
}

/// Writes STA1: magic, version, dim, count, means, row-major covariance
/// (all little-endian, 64-bit floats).
pub fn save_gaussian_stats(stats: &GaussianStats, path: impl AsRef<Path>) -> Result<()> {
    let d = stats.dim();
    let mut buf = Vec::with_capacity(28 + (d + d * d) * 8);
    buf.extend_from_slice(STA_MAGIC);
    buf.extend_from_slice(&STA_VERSION.to_le_bytes());
    buf.extend_from_slice(&(d as u64).to_le_bytes());
    buf.extend_from_slice(&(stats.count as u64).to_le_bytes());
    for &v in stats.mean.iter().chain(stats.cov.iter()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_gaussian_stats(path: impl AsRef<Path>) -> Result<GaussianStats> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let mut r = ByteReader::new(&bytes, path);
    r.magic(STA_MAGIC)?;
    r.version()?;
    let dim = r.u64()?;
    let count = r.u64()?;
    if dim == 0 {
        return Err(TetotError::Format(format!("{}: zero dimension", path.display())));
    }
    let d = r.count(dim, 8)?;
    let mean = r.f64s(d)?;
    let cells = d
        .checked_mul(d)
        .ok_or_else(|| TetotError::Format(format!("{}: shape overflows", path.display())))?;
    let cells = r.count(cells as u64, 8)?;
    let cov = r.f64s(cells)?;
    r.finish()?;
    GaussianStats::new(
        Array1::from(mean),
        Array2::from_shape_vec((d, d), cov).expect("d*d entries"),
        usize::try_from(count).unwrap_or(usize::MAX),
    )
}
