use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TetotError;

/// How encoder outputs are rescaled before feature costs are built.
///
/// Normalization statistics always come from the set being normalized, never
/// from a pool of domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    None,
    /// Each row divided by its Euclidean norm.
    #[default]
    L2PerSample,
    /// Each column centered and scaled by its population standard deviation.
    ZscorePerDomain,
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationMode::None => "none",
            NormalizationMode::L2PerSample => "l2",
            NormalizationMode::ZscorePerDomain => "zscore",
        })
    }
}

impl FromStr for NormalizationMode {
    type Err = TetotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "l2" | "l2_per_sample" => Ok(Self::L2PerSample),
            "zscore" | "zscore_per_domain" => Ok(Self::ZscorePerDomain),
            other => Err(TetotError::Input(format!("unknown normalization mode '{other}'"))),
        }
    }
}

/// Number of rows to draw from a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    #[default]
    All,
    Count(usize),
}

impl fmt::Display for SampleCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleCount::All => f.write_str("all"),
            SampleCount::Count(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for SampleCount {
    type Err = TetotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Self::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Self::Count(k)),
            _ => Err(TetotError::Input(format!(
                "sample count must be a positive integer or 'all', got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Exact,
    Sinkhorn,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Exact => "exact",
            SolverKind::Sinkhorn => "sinkhorn",
        })
    }
}

impl FromStr for SolverKind {
    type Err = TetotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Self::Exact),
            "sinkhorn" => Ok(Self::Sinkhorn),
            other => Err(TetotError::Input(format!("unknown solver '{other}'"))),
        }
    }
}

/// Settings for one metric evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetotConfig {
    /// Weight on the label cost.
    pub lambda: f64,
    pub norm_mode: NormalizationMode,
    pub num_source: SampleCount,
    pub num_target: SampleCount,
    pub seed: u64,
    pub solver: SolverKind,
    /// Sinkhorn regularization; `None` means `0.01 · mean(C)`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Use argmax one-hot pseudo-labels instead of softmax outputs (ablation).
    #[serde(default)]
    pub hard_pseudo_labels: bool,
    /// Ridge added to both covariances in the Gaussian variant.
    #[serde(default)]
    pub cov_jitter: f64,
}

impl Default for TetotConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            norm_mode: NormalizationMode::default(),
            num_source: SampleCount::All,
            num_target: SampleCount::All,
            seed: 0,
            solver: SolverKind::Exact,
            epsilon: None,
            hard_pseudo_labels: false,
            cov_jitter: 0.0,
        }
    }
}

impl TetotConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TetotError::Input(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        for (name, count) in [("num_source", self.num_source), ("num_target", self.num_target)] {
            if count == SampleCount::Count(0) {
                return Err(TetotError::Input(format!("{name} must be at least 1")));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(TetotError::Input(format!("epsilon must be positive, got {eps}")));
            }
        }
        if !(self.cov_jitter >= 0.0 && self.cov_jitter.is_finite()) {
            return Err(TetotError::Input("cov_jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TetotConfig::default();
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.norm_mode, NormalizationMode::L2PerSample);
        assert_eq!(c.num_source, SampleCount::All);
        assert_eq!(c.solver, SolverKind::Exact);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_negative_lambda_and_zero_counts() {
        let c = TetotConfig { lambda: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TetotConfig { num_target: SampleCount::Count(0), ..Default::default() };
        assert!(c.validate().is_err());
        assert!("0".parse::<SampleCount>().is_err());
        assert_eq!("all".parse::<SampleCount>().unwrap(), SampleCount::All);
    }
}
