//! Volumetric data types, file I/O, resampling, smoothing and intensity
//! normalization.
//!
//! All grids are stored with x varying fastest:
//! `index = x + nx * (y + ny * z)`.

mod io;
mod resample;
mod smooth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    load_labels, load_volume, save_labels, save_volume, Dtype, VolumeFormat, NIFTI_HEADER_SIZE,
};
pub use resample::{resample, resample_labels, Interpolation};
pub use smooth::{gaussian_kernel, gaussian_smooth};

pub type Dims = [usize; 3];
pub type Spacing = [f64; 3];

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("invalid dimensions {0:?}: every axis must be positive")]
    InvalidDims(Dims),
    #[error("invalid spacing {0:?}: every component must be positive and finite")]
    InvalidSpacing(Spacing),
    #[error("data length {actual} does not match dims (expected {expected})")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },
    #[error("unsupported dtype {dtype} (at byte {offset})")]
    UnsupportedDtype { offset: u64, dtype: String },
    #[error("truncated payload starting at byte {offset}: expected {expected} bytes, found {actual}")]
    TruncatedPayload {
        offset: u64,
        expected: u64,
        actual: u64,
    },
    #[error("unsupported file format for {0}")]
    UnsupportedFormat(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("volume is constant; cannot normalize")]
    ConstantVolume,
    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: Dims, right: Dims },
    #[error("{which} mask is not binary at voxel {voxel:?}")]
    NonBinaryMask { which: &'static str, voxel: Dims },
    #[error("endo and wall masks overlap at voxel {voxel:?}")]
    OverlappingMasks { voxel: Dims },
    #[error("value {value} at voxel {voxel:?} is not a non-negative integer label")]
    InvalidLabel { voxel: Dims, value: f64 },
    #[error("non-finite intensity at voxel {voxel:?}")]
    NonFinite { voxel: Dims },
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = VolumeError> = std::result::Result<T, E>;

/// Grid geometry: voxel counts per axis and voxel size in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: Dims,
    pub spacing: Spacing,
}

impl Grid {
    pub fn new(dims: Dims, spacing: Spacing) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidDims(dims));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(VolumeError::InvalidSpacing(spacing));
        }
        Ok(Self { dims, spacing })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> Dims {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    pub fn ensure_same_dims(&self, other: &Grid) -> Result<()> {
        if self.dims != other.dims {
            return Err(VolumeError::DimsMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }
}

/// Scalar intensity volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    grid: Grid,
    data: Vec<f64>,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        Self::from_grid(grid, data)
    }

    pub fn from_grid(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(VolumeError::LengthMismatch {
                expected: grid.len(),
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite {
                voxel: grid.coords(i),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn filled(dims: Dims, spacing: Spacing, value: f64) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        Self::from_grid(grid, vec![value; grid.len()])
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn<F>(dims: Dims, spacing: Spacing, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> f64,
    {
        let grid = Grid::new(dims, spacing)?;
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::from_grid(grid, data)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dims(&self) -> Dims {
        self.grid.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.grid.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        crate::util::par_sum(self.data.len(), |i| self.data[i]) / self.data.len() as f64
    }

    /// Returns a volume with the same grid and new data. Panics on a length
    /// mismatch; internal transforms always preserve length.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Volume3D {
        assert_eq!(data.len(), self.data.len());
        Volume3D {
            grid: self.grid,
            data,
        }
    }
}

/// Integer semantic label map.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap3D {
    grid: Grid,
    labels: Vec<u32>,
}

impl LabelMap3D {
    pub fn new(dims: Dims, spacing: Spacing, labels: Vec<u32>) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        Self::from_grid(grid, labels)
    }

    pub fn from_grid(grid: Grid, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(VolumeError::LengthMismatch {
                expected: grid.len(),
                actual: labels.len(),
            });
        }
        Ok(Self { grid, labels })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dims(&self) -> Dims {
        self.grid.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.grid.spacing
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.labels[self.grid.index(x, y, z)]
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Sorted distinct label values.
    pub fn label_set(&self) -> Vec<u32> {
        let counts = self.counts();
        (0..counts.len() as u32)
            .filter(|&l| counts[l as usize] > 0)
            .collect()
    }

    /// Labels in `0..=max_label` that occur nowhere in the map.
    pub fn absent_labels(&self) -> Vec<u32> {
        let counts = self.counts();
        (0..counts.len() as u32)
            .filter(|&l| counts[l as usize] == 0)
            .collect()
    }

    /// Voxel count per label value `0..=max_label`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.max_label() as usize + 1];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn to_volume(&self) -> Volume3D {
        Volume3D {
            grid: self.grid,
            data: self.labels.iter().map(|&l| l as f64).collect(),
        }
    }

    /// Interprets a volume's values as labels; every value must be a
    /// non-negative integer.
    pub fn from_volume(v: &Volume3D) -> Result<Self> {
        let mut labels = Vec::with_capacity(v.len());
        for (i, &x) in v.data().iter().enumerate() {
            if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
                return Err(VolumeError::InvalidLabel {
                    voxel: v.grid.coords(i),
                    value: x,
                });
            }
            labels.push(x as u32);
        }
        Self::from_grid(v.grid, labels)
    }
}

/// Binary expert masks for endocardium and wall.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    grid: Grid,
    endo: Vec<u8>,
    wall: Vec<u8>,
}

impl MaskPair {
    pub fn new(grid: Grid, endo: Vec<u8>, wall: Vec<u8>) -> Result<Self> {
        for m in [&endo, &wall] {
            if m.len() != grid.len() {
                return Err(VolumeError::LengthMismatch {
                    expected: grid.len(),
                    actual: m.len(),
                });
            }
        }
        for (which, m) in [("endo", &endo), ("wall", &wall)] {
            if let Some(i) = m.iter().position(|&v| v > 1) {
                return Err(VolumeError::NonBinaryMask {
                    which,
                    voxel: grid.coords(i),
                });
            }
        }
        if let Some(i) = endo.iter().zip(&wall).position(|(&e, &w)| e == 1 && w == 1) {
            return Err(VolumeError::OverlappingMasks {
                voxel: grid.coords(i),
            });
        }
        Ok(Self { grid, endo, wall })
    }

    /// Empty masks over `grid`.
    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            endo: vec![0; grid.len()],
            wall: vec![0; grid.len()],
        }
    }

    pub fn from_label_maps(endo: &LabelMap3D, wall: &LabelMap3D) -> Result<Self> {
        endo.grid.ensure_same_dims(&wall.grid)?;
        let cast = |which: &'static str, m: &LabelMap3D| -> Result<Vec<u8>> {
            m.labels
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    if l > 1 {
                        Err(VolumeError::NonBinaryMask {
                            which,
                            voxel: m.grid.coords(i),
                        })
                    } else {
                        Ok(l as u8)
                    }
                })
                .collect()
        };
        Self::new(endo.grid, cast("endo", endo)?, cast("wall", wall)?)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dims(&self) -> Dims {
        self.grid.dims
    }

    pub fn endo(&self) -> &[u8] {
        &self.endo
    }

    pub fn wall(&self) -> &[u8] {
        &self.wall
    }

    #[inline]
    pub fn is_masked(&self, i: usize) -> bool {
        self.endo[i] == 1 || self.wall[i] == 1
    }
}

/// Affine map of intensities onto `[0, 1]` (min to 0, max to 1).
pub fn normalize_intensity(v: &Volume3D) -> Result<Volume3D> {
    let (lo, hi) = v.min_max();
    if lo >= hi {
        return Err(VolumeError::ConstantVolume);
    }
    let range = hi - lo;
    let data = v
        .data
        .iter()
        .map(|&x| ((x - lo) / range).clamp(0.0, 1.0))
        .collect();
    Ok(v.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(values: &[f64]) -> Volume3D {
        Volume3D::new([values.len(), 1, 1], [1.0; 3], values.to_vec()).unwrap()
    }

    #[test]
    fn axis_order_is_x_fastest() {
        let g = Grid::new([3, 4, 5], [1.0; 3]).unwrap();
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
        assert_eq!(g.coords(g.index(2, 3, 4)), [2, 3, 4]);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(matches!(
            Volume3D::new([2, 0, 1], [1.0; 3], vec![]),
            Err(VolumeError::InvalidDims(_))
        ));
        assert!(matches!(
            Volume3D::new([1, 1, 1], [1.0, 0.0, 1.0], vec![0.0]),
            Err(VolumeError::InvalidSpacing(_))
        ));
        assert!(matches!(
            Volume3D::new([2, 1, 1], [1.0; 3], vec![0.0]),
            Err(VolumeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_intensity(&vol(&[0.0, 5.0, 10.0])).unwrap();
        assert_eq!(n.data(), &[0.0, 0.5, 1.0]);
        let n = normalize_intensity(&vol(&[-2.0, 0.0, 2.0])).unwrap();
        assert_eq!(n.data(), &[0.0, 0.5, 1.0]);
        let unit = vol(&[0.0, 0.25, 1.0, 0.5]);
        assert_eq!(normalize_intensity(&unit).unwrap(), unit);
        assert!(matches!(
            normalize_intensity(&vol(&[3.0, 3.0])),
            Err(VolumeError::ConstantVolume)
        ));
    }

    #[test]
    fn masks_must_be_disjoint_and_binary() {
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        assert!(MaskPair::new(g, vec![1, 0], vec![0, 1]).is_ok());
        assert!(matches!(
            MaskPair::new(g, vec![1, 0], vec![1, 0]),
            Err(VolumeError::OverlappingMasks { voxel: [0, 0, 0] })
        ));
        assert!(matches!(
            MaskPair::new(g, vec![2, 0], vec![0, 0]),
            Err(VolumeError::NonBinaryMask { which: "endo", .. })
        ));
    }

    #[test]
    fn label_set_and_absent_labels() {
        let m = LabelMap3D::new([5, 1, 1], [1.0; 3], vec![0, 1, 2, 4, 4]).unwrap();
        assert_eq!(m.label_set(), vec![0, 1, 2, 4]);
        assert_eq!(m.absent_labels(), vec![3]);
        assert_eq!(m.counts(), vec![1, 1, 1, 0, 2]);
    }
}
