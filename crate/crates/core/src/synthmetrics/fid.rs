//! Fréchet distance between Gaussian fits of two feature distributions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureMoments, MetricError, Result};

/// Ridge added to both covariances when regularization is enabled.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FidOptions {
    /// Adds `eps * I` to both covariances; off by default.
    pub regularization: Option<f64>,
}

/// Eigenvalues of a symmetric matrix with small negative values (down to
/// `-1e-8 * trace`) clamped to zero.
fn clamped_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let trace = m.trace();
    let tol = 1e-8 * trace.max(0.0);
    let mut eig = m.symmetric_eigen();
    for l in eig.eigenvalues.iter_mut() {
        if !l.is_finite() || *l < -tol {
            return Err(MetricError::NonFiniteEigenvalue {
                value: *l,
                tolerance: tol,
            });
        }
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    Ok(eig)
}

fn psd_sqrt(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = clamped_eigen(m)?;
    let root = eig.eigenvalues.map(f64::sqrt);
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&root) * q.transpose())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// `|mu_r - mu_g|^2 + Tr(S_r) + Tr(S_g) - 2 Tr((S_r S_g)^(1/2))`.
pub fn fid(r: &FeatureMoments, g: &FeatureMoments) -> Result<f64> {
    fid_with(r, g, FidOptions::default())
}

/// FID with options. The cross term is evaluated as the trace of the square
/// root of the symmetric matrix `S_r^(1/2) S_g S_r^(1/2)`, which has the same
/// spectrum as `S_r S_g`.
pub fn fid_with(r: &FeatureMoments, g: &FeatureMoments, opts: FidOptions) -> Result<f64> {
    if r.d() != g.d() {
        return Err(MetricError::DimensionMismatch {
            left: r.d(),
            right: g.d(),
        });
    }
    let d = r.d();
    let ridge = opts.regularization.unwrap_or(0.0) * DMatrix::<f64>::identity(d, d);
    let sr = &r.sigma + &ridge;
    let sg = &g.sigma + &ridge;

    let root_r = psd_sqrt(sr.clone())?;
    let a = symmetrize(&root_r * &sg * &root_r);
    let cross: f64 = clamped_eigen(a)?.eigenvalues.iter().map(|l| l.sqrt()).sum();

    let diff = &r.mu - &g.mu;
    let mean_term = diff.dot(&diff);
    let scale = mean_term + sr.trace() + sg.trace();
    let raw = scale - 2.0 * cross;
    if !raw.is_finite() || raw < -1e-6 * scale {
        return Err(MetricError::NonFiniteEigenvalue {
            value: raw,
            tolerance: 1e-6 * scale,
        });
    }
    Ok(raw.max(0.0))
}
