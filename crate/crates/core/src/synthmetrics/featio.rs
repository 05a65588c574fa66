//! FEAT binary feature files and headerless CSV import.
//!
//! Layout: `b"FEAT"`, version `u16 = 1`, `n: u32`, `d: u32`, then `n * d`
//! little-endian float32 values in row-major order.

use std::fs;
use std::path::Path;

use super::{FeatureSet, MetricError, Result};
use crate::util::write_atomic;

pub const FEAT_MAGIC: &[u8; 4] = b"FEAT";
pub const FEAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

fn malformed(path: &Path, reason: impl Into<String>) -> MetricError {
    MetricError::MalformedFeatureFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_feat(path: &Path, bytes: &[u8]) -> Result<FeatureSet> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed(
            path,
            format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != FEAT_MAGIC {
        return Err(malformed(path, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEAT_VERSION {
        return Err(malformed(path, format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if n == 0 || d == 0 {
        return Err(malformed(path, format!("empty shape n={n}, d={d}")));
    }
    let expected = n * d * 4;
    let actual = bytes.len() - HEADER_LEN;
    if actual != expected {
        return Err(malformed(
            path,
            format!("payload is {actual} bytes, expected {expected}"),
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    FeatureSet::new(n, d, data).map_err(|e| malformed(path, e.to_string()))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<FeatureSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
        let row = rec
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| malformed(path, format!("row {i}: cannot parse {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(malformed(path, "no rows"));
    }
    FeatureSet::from_rows(&rows).map_err(|e| malformed(path, e.to_string()))
}

/// Loads a FEAT file, or a headerless CSV (one row per sample) when the
/// file does not start with the FEAT magic.
pub fn load_features(path: &Path) -> Result<FeatureSet> {
    let bytes = fs::read(path).map_err(|source| MetricError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if bytes.starts_with(FEAT_MAGIC) {
        parse_feat(path, &bytes)
    } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_csv(path, &bytes)
    } else {
        parse_feat(path, &bytes)
    }
}

/// Writes a FEAT file. Values are stored as float32.
pub fn save_features(fs_: &FeatureSet, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + fs_.data().len() * 4);
    bytes.extend_from_slice(FEAT_MAGIC);
    bytes.extend_from_slice(&FEAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(fs_.n() as u32).to_le_bytes());
    bytes.extend_from_slice(&(fs_.d() as u32).to_le_bytes());
    for &v in fs_.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_atomic(path, &bytes).map_err(|source| MetricError::Io {
        path: path.display().to_string(),
        source,
    })
}
