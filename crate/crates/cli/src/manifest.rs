use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tetot_core::{Result, TetotError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub candidate_id: String,
    pub source: PathBuf,
    pub target: PathBuf,
    pub head: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

/// Reads a manifest and resolves relative paths against its directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| TetotError::Format(format!("{}: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(TetotError::Input(format!("{}: manifest is empty", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        for p in [&mut e.source, &mut e.target, &mut e.head] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(entries)
}
