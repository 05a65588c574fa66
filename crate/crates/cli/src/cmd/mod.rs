pub mod augment;
pub mod compose;
pub mod diff;
pub mod eval;
pub mod sweep;

use std::path::Path;

use lge_synthlab::volcore::{gaussian_smooth, load_labels, load_volume, normalize_intensity};
use lge_synthlab::{LabelMap3D, Volume3D};

use crate::error::{data, CliResult};

pub fn read_volume(path: &Path) -> CliResult<Volume3D> {
    load_volume(path).map_err(data(path.display()))
}

pub fn read_labels(path: &Path) -> CliResult<LabelMap3D> {
    load_labels(path).map_err(data(path.display()))
}

/// Load, normalize to [0, 1] and smooth. Returns (normalized, smoothed).
pub fn prepare(path: &Path, sigma: f64) -> CliResult<(Volume3D, Volume3D)> {
    let v = read_volume(path)?;
    let n = normalize_intensity(&v).map_err(data(path.display()))?;
    let s = gaussian_smooth(&n, sigma).map_err(data("smoothing"))?;
    Ok((n, s))
}
