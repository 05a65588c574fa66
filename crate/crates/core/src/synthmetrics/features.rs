//! Feature sets, their Gaussian moments, and a built-in deterministic
//! volume descriptor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{MetricError, Result};
use crate::util::CompensatedSum;
use crate::volcore::Volume3D;

/// Length of the built-in descriptor: block means on 8x8x4, 4x4x2 and 2x2x1
/// grids (256 + 32 + 4) plus global mean, std, min and max.
pub const DESCRIPTOR_DIM: usize = 296;

const DESCRIPTOR_GRIDS: [[usize; 3]; 3] = [[8, 8, 4], [4, 4, 2], [2, 2, 1]];

/// Where a feature matrix came from. Reports carry this so that built-in
/// and imported features are never mixed silently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// The built-in 296-d block descriptor.
    Descriptor,
    /// Features imported from a file produced elsewhere.
    Imported(String),
}

impl std::fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureSource::Descriptor => write!(f, "descriptor-{DESCRIPTOR_DIM}"),
            FeatureSource::Imported(p) => write!(f, "imported:{p}"),
        }
    }
}

/// `n x d` feature matrix, one row per volume, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureSet {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(MetricError::InvalidFeatures(format!("empty shape {n}x{d}")));
        }
        if data.len() != n * d {
            return Err(MetricError::InvalidFeatures(format!(
                "{} values for shape {n}x{d}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::InvalidFeatures(format!(
                "non-finite value at row {}, column {}",
                i / d,
                i % d
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(MetricError::InvalidFeatures(format!(
                "row {i} has {} columns, expected {d}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Sample mean and covariance (`1/(n-1)`), symmetrized.
    pub fn moments(&self) -> Result<FeatureMoments> {
        if self.n < 2 {
            return Err(MetricError::TooFewSamples {
                needed: 2,
                got: self.n,
            });
        }
        let (n, d) = (self.n, self.d);
        let mu = DVector::from_fn(d, |j, _| {
            self.rows().map(|r| r[j]).collect::<CompensatedSum>().value() / n as f64
        });
        let centered = DMatrix::from_fn(n, d, |i, j| self.data[i * d + j] - mu[j]);
        let mut sigma = centered.transpose() * &centered / (n as f64 - 1.0);
        let t = sigma.transpose();
        sigma = (sigma + t) * 0.5;
        Ok(FeatureMoments { mu, sigma, n })
    }
}

/// Mean and covariance of a feature distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMoments {
    pub(crate) mu: DVector<f64>,
    pub(crate) sigma: DMatrix<f64>,
    pub(crate) n: usize,
}

impl FeatureMoments {
    /// Validates symmetry (max-abs asymmetry below 1e-9) and positive
    /// semi-definiteness (eigenvalues at least `-1e-8 * trace`).
    pub fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        let d = mu.len();
        if d == 0 || sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
            return Err(MetricError::InvalidMoments(format!(
                "mean has {d} entries but covariance is not {d}x{d}"
            )));
        }
        let sigma = DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(MetricError::InvalidMoments("non-finite entry".into()));
        }
        let asym = (&sigma - sigma.transpose()).amax();
        if asym >= 1e-9 {
            return Err(MetricError::InvalidMoments(format!(
                "covariance asymmetry {asym:e} exceeds 1e-9"
            )));
        }
        let tol = 1e-8 * sigma.trace().abs();
        let min_eig = sigma.clone().symmetric_eigenvalues().min();
        if min_eig < -tol {
            return Err(MetricError::InvalidMoments(format!(
                "covariance eigenvalue {min_eig:e} below -1e-8 * trace"
            )));
        }
        Ok(Self {
            mu: DVector::from_vec(mu),
            sigma,
            n,
        })
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        self.mu.as_slice()
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.sigma[(i, j)]
    }

    pub fn covariance_rows(&self) -> Vec<Vec<f64>> {
        (0..self.d())
            .map(|i| (0..self.d()).map(|j| self.sigma[(i, j)]).collect())
            .collect()
    }
}

/// Half-open voxel range of block `b` when `n` voxels are split into `g`
/// blocks; never empty.
fn block_range(b: usize, g: usize, n: usize) -> std::ops::Range<usize> {
    let start = (b * n / g).min(n - 1);
    let end = ((b + 1) * n / g).max(start + 1).min(n);
    start..end
}

/// Built-in 296-d descriptor: block means on three grids (x-fastest block
/// order within each grid) followed by the global mean, population standard
/// deviation, minimum and maximum.
pub fn extract_features(v: &Volume3D) -> Vec<f64> {
    let dims = v.dims();
    let grid = v.grid();
    let data = v.data();
    let mut out = Vec::with_capacity(DESCRIPTOR_DIM);
    for g in DESCRIPTOR_GRIDS {
        for bz in 0..g[2] {
            for by in 0..g[1] {
                for bx in 0..g[0] {
                    let (rx, ry, rz) = (
                        block_range(bx, g[0], dims[0]),
                        block_range(by, g[1], dims[1]),
                        block_range(bz, g[2], dims[2]),
                    );
                    let mut s = CompensatedSum::new();
                    let mut count = 0usize;
                    for z in rz.clone() {
                        for y in ry.clone() {
                            for x in rx.clone() {
                                s.add(data[grid.index(x, y, z)]);
                                count += 1;
                            }
                        }
                    }
                    out.push(s.value() / count as f64);
                }
            }
        }
    }
    let n = data.len() as f64;
    let mean = data.iter().copied().collect::<CompensatedSum>().value() / n;
    let var = data
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value()
        / n;
    let (lo, hi) = v.min_max();
    out.extend([mean, var.sqrt(), lo, hi]);
    debug_assert_eq!(out.len(), DESCRIPTOR_DIM);
    out
}
