//! Binary (EMB1 / LBL / HED1) and CSV readers and writers.
//!
//! All binary formats are little-endian. Features and head parameters are
//! stored as 32-bit floats and widened to 64 bits on load.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use super::{ClassifierHead, EmbeddingSet};
use crate::error::{Result, TetotError};

pub(crate) const EMB_MAGIC: &[u8; 8] = b"TETOTEMB";
pub(crate) const LBL_MAGIC: &[u8; 8] = b"TETOTLBL";
pub(crate) const HED_MAGIC: &[u8; 8] = b"TETOTHED";
const VERSION: u32 = 1;
const DTYPE_F32: u32 = 1;
const UNLABELED: i64 = -1;

fn format_err<T>(path: &Path, msg: impl std::fmt::Display) -> Result<T> {
    Err(TetotError::Format(format!("{}: {msg}", path.display())))
}

/// Bounds-checked little-endian cursor over a file's bytes.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8], path: &'a Path) -> Self {
        Self { buf, pos: 0, path }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => format_err(
                self.path,
                format_args!("truncated: needed {n} bytes at offset {}", self.pos),
            ),
        }
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let got = self.take(8)?;
        if got != expected {
            return format_err(
                self.path,
                format_args!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            );
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn version(&mut self) -> Result<()> {
        match self.u32()? {
            VERSION => Ok(()),
            v => format_err(self.path, format_args!("unsupported version {v}")),
        }
    }

    /// A declared element count, checked against the bytes actually present.
    pub(crate) fn count(&mut self, declared: u64, elem_size: usize) -> Result<usize> {
        let n = usize::try_from(declared).ok();
        let remaining = self.buf.len() - self.pos;
        match n.and_then(|n| n.checked_mul(elem_size)) {
            Some(bytes) if bytes <= remaining => Ok(n.unwrap()),
            _ => format_err(
                self.path,
                format_args!("declared {declared} elements but only {remaining} payload bytes remain"),
            ),
        }
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn i64s(&mut self, n: usize) -> Result<Vec<i64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return format_err(
                self.path,
                format_args!("{} trailing bytes after payload", self.buf.len() - self.pos),
            );
        }
        Ok(())
    }
}

/// Path of the label sidecar for an embedding file: same stem, `.lbl`.
pub fn label_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("lbl")
}

fn domain_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads an EMB1 file (plus its `.lbl` sidecar when present) or, for `.csv`
/// paths, the CSV fallback.
pub fn load_embedding_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return load_csv(path);
    }

    let bytes = fs::read(path)?;
    let mut r = ByteReader::new(&bytes, path);
    r.magic(EMB_MAGIC)?;
    r.version()?;
    let dtype = r.u32()?;
    if dtype != DTYPE_F32 {
        return format_err(path, format_args!("unsupported dtype code {dtype}"));
    }
    let rows = r.u64()?;
    let cols = r.u64()?;
    if rows == 0 || cols == 0 {
        return format_err(path, format_args!("empty shape {rows}x{cols}"));
    }
    let total = rows
        .checked_mul(cols)
        .ok_or_else(|| TetotError::Format(format!("{}: shape overflows", path.display())))?;
    let total = r.count(total, 4)?;
    let values = r.f32s(total)?;
    r.finish()?;
    let features = Array2::from_shape_vec((rows as usize, cols as usize), values)
        .expect("shape checked above");
    let mut set = EmbeddingSet::new(features, domain_id_of(path))?;

    let sidecar = label_sidecar_path(path);
    if sidecar.exists() {
        let (labels, k) = load_labels(&sidecar)?;
        if labels.len() != set.n_samples() {
            return format_err(
                &sidecar,
                format_args!("{} labels for {} samples", labels.len(), set.n_samples()),
            );
        }
        set = set.with_labels(labels, k)?;
    }
    Ok(set)
}

fn load_labels(path: &Path) -> Result<(Vec<Option<usize>>, usize)> {
    let bytes = fs::read(path)?;
    let mut r = ByteReader::new(&bytes, path);
    r.magic(LBL_MAGIC)?;
    r.version()?;
    let count = r.u64()?;
    let k = r.u32()? as usize;
    let count = r.count(count, 8)?;
    let raw = r.i64s(count)?;
    r.finish()?;
    if k == 0 {
        return Err(TetotError::Data(format!("{}: num_classes is 0", path.display())));
    }
    let labels = raw
        .into_iter()
        .enumerate()
        .map(|(i, l)| match l {
            UNLABELED => Ok(None),
            l if l >= 0 && (l as u64) < k as u64 => Ok(Some(l as usize)),
            l => Err(TetotError::Data(format!(
                "{}: label {l} at sample {i} is outside [0, {k})",
                path.display()
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((labels, k))
}

/// Writes `set` as EMB1. Labels, when present, go to the `.lbl` sidecar; a
/// stale sidecar is removed when the set has none.
pub fn save_embedding_set(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = set.features().dim();
    let mut buf = Vec::with_capacity(32 + rows * cols * 4);
    buf.extend_from_slice(EMB_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&DTYPE_F32.to_le_bytes());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for &v in set.features() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, buf)?;

    let sidecar = label_sidecar_path(path);
    match (set.labels(), set.num_classes()) {
        (Some(labels), Some(k)) => {
            let mut buf = Vec::with_capacity(28 + labels.len() * 8);
            buf.extend_from_slice(LBL_MAGIC);
            buf.extend_from_slice(&VERSION.to_le_bytes());
            buf.extend_from_slice(&(labels.len() as u64).to_le_bytes());
            buf.extend_from_slice(&(k as u32).to_le_bytes());
            for l in labels {
                let raw = l.map_or(UNLABELED, |l| l as i64);
                buf.extend_from_slice(&raw.to_le_bytes());
            }
            fs::write(sidecar, buf)?;
        }
        _ => {
            if sidecar.exists() {
                fs::remove_file(sidecar)?;
            }
        }
    }
    Ok(())
}

fn load_csv(path: &Path) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut label_column = false;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) if !(line == 0 && values.is_empty()) => {
                let mut values = values;
                if label_column {
                    let raw = values.pop().ok_or_else(|| {
                        TetotError::Format(format!("{}: row {line} is empty", path.display()))
                    })?;
                    labels.push(parse_csv_label(path, line, raw)?);
                }
                rows.push(values);
            }
            _ if line == 0 => {
                label_column = record
                    .iter()
                    .next_back()
                    .is_some_and(|h| h.eq_ignore_ascii_case("label"));
            }
            _ => {
                return format_err(path, format_args!("non-numeric value on line {}", line + 1));
            }
        }
    }

    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return format_err(path, "no numeric rows");
    }
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return format_err(path, format_args!("row {i} has {} columns, expected {cols}", rows[i].len()));
    }
    let n = rows.len();
    let features = Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .expect("rectangular rows");
    let set = EmbeddingSet::new(features, domain_id_of(path))?;
    match labels.iter().flatten().max() {
        Some(&max) if label_column => set.with_labels(labels, max + 1),
        _ => Ok(set),
    }
}

fn parse_csv_label(path: &Path, line: usize, raw: f64) -> Result<Option<usize>> {
    if raw == UNLABELED as f64 {
        Ok(None)
    } else if raw >= 0.0 && raw.fract() == 0.0 && raw < u32::MAX as f64 {
        Ok(Some(raw as usize))
    } else {
        Err(TetotError::Data(format!(
            "{}: invalid label {raw} on line {}",
            path.display(),
            line + 1
        )))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> TetotError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => TetotError::Io(io),
            _ => unreachable!(),
        }
    } else {
        TetotError::Format(format!("{}: {e}", path.display()))
    }
}

pub fn load_classifier_head(path: impl AsRef<Path>) -> Result<ClassifierHead> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let mut r = ByteReader::new(&bytes, path);
    r.magic(HED_MAGIC)?;
    r.version()?;
    let k = r.u64()?;
    let dim = r.u64()?;
    if k < 2 || dim == 0 {
        return format_err(path, format_args!("invalid head shape K={k}, dim={dim}"));
    }
    let n_weights = k
        .checked_mul(dim)
        .ok_or_else(|| TetotError::Format(format!("{}: shape overflows", path.display())))?;
    let n_weights = r.count(n_weights, 4)?;
    let weights = r.f32s(n_weights)?;
    let k = r.count(k, 4)?;
    let bias = r.f32s(k)?;
    r.finish()?;
    let weights = Array2::from_shape_vec((k, dim as usize), weights).expect("shape checked");
    ClassifierHead::new(weights, Array1::from(bias))
}

pub fn save_classifier_head(head: &ClassifierHead, path: impl AsRef<Path>) -> Result<()> {
    let (k, dim) = head.weights().dim();
    let mut buf = Vec::with_capacity(28 + (k * dim + k) * 4);
    buf.extend_from_slice(HED_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(k as u64).to_le_bytes());
    buf.extend_from_slice(&(dim as u64).to_le_bytes());
    for &v in head.weights().iter().chain(head.bias().iter()) {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}
