//! Synthetic-image quality metrics: PSNR, MS-SSIM, FID and unbiased MMD²,
//! plus the feature sets they consume.

mod features;
mod featio;
mod fid;
mod mmd;
mod msssim;

use thiserror::Error;

use crate::volcore::Dims;

pub use features::{extract_features, FeatureMoments, FeatureSet, FeatureSource, DESCRIPTOR_DIM};
pub use featio::{load_features, save_features, FEAT_MAGIC, FEAT_VERSION};
pub use fid::{fid, fid_with, FidOptions, DEFAULT_REGULARIZATION};
pub use mmd::{mmd2, Kernel};
pub use msssim::{ms_ssim, window_stats, MsSsimConfig, WindowStats};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: Dims, right: Dims },
    #[error("volumes are identical (zero MSE); PSNR is infinite")]
    ZeroMse,
    #[error("dynamic range must be positive, got {0}")]
    InvalidDynamicRange(f64),
    #[error("volume too small at scale {scale}: axis {axis} has {size} voxels, window needs {window}")]
    VolumeTooSmall {
        scale: usize,
        axis: usize,
        size: usize,
        window: usize,
    },
    #[error("invalid MS-SSIM configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("eigenvalue {value} is non-finite or too negative (tolerance {tolerance})")]
    NonFiniteEigenvalue { value: f64, tolerance: f64 },
    #[error("invalid feature moments: {0}")]
    InvalidMoments(String),
    #[error("invalid feature set: {0}")]
    InvalidFeatures(String),
    #[error("malformed feature file {path}: {reason}")]
    MalformedFeatureFile { path: String, reason: String },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

use crate::volcore::Volume3D;

fn ensure_same_dims(a: &Volume3D, b: &Volume3D) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimsMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// Mean squared voxel difference.
pub fn mse(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    ensure_same_dims(a, b)?;
    let (x, y) = (a.data(), b.data());
    Ok(crate::util::par_sum(x.len(), |i| {
        let d = x[i] - y[i];
        d * d
    }) / x.len() as f64)
}

/// Peak signal-to-noise ratio `10 log10(L^2 / MSE)` in dB.
pub fn psnr(a: &Volume3D, b: &Volume3D, dynamic_range: f64) -> Result<f64> {
    if !(dynamic_range > 0.0 && dynamic_range.is_finite()) {
        return Err(MetricError::InvalidDynamicRange(dynamic_range));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Err(MetricError::ZeroMse);
    }
    Ok(10.0 * (dynamic_range * dynamic_range / m).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> Volume3D {
        Volume3D::new([v.len(), 1, 1], [1.0; 3], v.to_vec()).unwrap()
    }

    #[test]
    fn psnr_of_offset_volume() {
        let a = line(&[0.0, 0.2, 0.5, 0.7]);
        let b = line(&[0.1, 0.3, 0.6, 0.8]);
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!((p - 20.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn psnr_identical_is_an_error() {
        let a = line(&[0.0, 0.5]);
        assert!(matches!(psnr(&a, &a, 1.0), Err(MetricError::ZeroMse)));
        assert!(matches!(
            psnr(&a, &a, 0.0),
            Err(MetricError::InvalidDynamicRange(_))
        ));
        assert!(matches!(
            psnr(&a, &line(&[0.0]), 1.0),
            Err(MetricError::DimsMismatch { .. })
        ));
    }
}
