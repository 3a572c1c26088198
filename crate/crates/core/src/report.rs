use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Tetot,
    TetotApprox,
    Entropy,
    Accuracy,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Tetot => "tetot",
            MetricName::TetotApprox => "tetot_approx",
            MetricName::Entropy => "entropy",
            MetricName::Accuracy => "accuracy",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named scalar plus the settings that produced it.
///
/// `meta` is ordered so serialized reports are byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_name: MetricName,
    pub value: f64,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn new(metric_name: MetricName, value: f64) -> Self {
        debug_assert!(value.is_finite(), "{metric_name} value must be finite");
        Self {
            metric_name,
            value,
            meta: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}
