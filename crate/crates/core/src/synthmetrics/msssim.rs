//! 3D multi-scale structural similarity.
//!
//! Local statistics use a separable Gaussian window with valid (unpadded)
//! filtering. Between scales both volumes are 2x2x2 average pooled. The
//! result is `prod_{j<M} CS_j^beta_j * SSIM_M^beta_M`, where `CS_j` and
//! `SSIM_M` are spatial means of the per-window maps. Means below zero are
//! clamped to zero before exponentiation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensure_same_dims, MetricError, Result};
use crate::util::par_sum;
use crate::volcore::{Dims, Volume3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsSsimConfig {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L` of the intensities.
    pub dynamic_range: f64,
    /// One weight per scale, finest first. Used as given unless
    /// `renormalize_weights` is set. The defaults are the first three of the
    /// common five-scale set and sum to about 0.63.
    pub weights: Vec<f64>,
    /// Window edge length in voxels (odd).
    pub window_size: usize,
    pub window_sigma: f64,
    pub renormalize_weights: bool,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            weights: vec![0.0448, 0.2856, 0.3001],
            window_size: 11,
            window_sigma: 1.5,
            renormalize_weights: false,
        }
    }
}

impl MsSsimConfig {
    pub fn scales(&self) -> usize {
        self.weights.len()
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MetricError::InvalidConfig(m.to_string()));
        if self.weights.is_empty() || self.weights.iter().any(|&w| !(w > 0.0)) {
            return bad("weights must be non-empty and positive");
        }
        if !(self.dynamic_range > 0.0 && self.dynamic_range.is_finite()) {
            return Err(MetricError::InvalidDynamicRange(self.dynamic_range));
        }
        if self.window_size == 0 || self.window_size % 2 == 0 {
            return bad("window size must be odd");
        }
        if !(self.window_sigma > 0.0) {
            return bad("window sigma must be positive");
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return bad("k1 and k2 must be positive");
        }
        Ok(())
    }

    /// Weights as applied: as given, or scaled to unit sum.
    pub fn effective_weights(&self) -> Vec<f64> {
        if self.renormalize_weights {
            let s: f64 = self.weights.iter().sum();
            self.weights.iter().map(|w| w / s).collect()
        } else {
            self.weights.clone()
        }
    }

    /// Normalized 1D window taps.
    pub fn window(&self) -> Vec<f64> {
        let c = (self.window_size / 2) as f64;
        let s2 = 2.0 * self.window_sigma * self.window_sigma;
        let w: Vec<f64> = (0..self.window_size)
            .map(|i| (-(i as f64 - c).powi(2) / s2).exp())
            .collect();
        let sum: f64 = w.iter().sum();
        w.into_iter().map(|x| x / sum).collect()
    }
}

/// Per-window local statistics on the valid output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub dims: Dims,
    pub mu_x: Vec<f64>,
    pub mu_y: Vec<f64>,
    /// Clamped to be non-negative.
    pub var_x: Vec<f64>,
    pub var_y: Vec<f64>,
    pub cov_xy: Vec<f64>,
}

/// Valid separable filtering; output shrinks by `taps - 1` on every axis.
fn filter_valid(src: &[f64], dims: Dims, taps: &[f64]) -> (Vec<f64>, Dims) {
    let w = taps.len();
    let mut cur = src.to_vec();
    let mut d = dims;
    for axis in 0..3 {
        let mut od = d;
        od[axis] = d[axis] + 1 - w;
        let stride = [1, d[0], d[0] * d[1]][axis];
        let plane = od[0] * od[1];
        let mut out = vec![0.0; od[0] * od[1] * od[2]];
        out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
            for y in 0..od[1] {
                for x in 0..od[0] {
                    let base = x + d[0] * (y + d[1] * z);
                    let mut acc = 0.0;
                    for (t, &c) in taps.iter().enumerate() {
                        acc += c * cur[base + t * stride];
                    }
                    slab[x + od[0] * y] = acc;
                }
            }
        });
        cur = out;
        d = od;
    }
    (cur, d)
}

fn stats(x: &[f64], y: &[f64], dims: Dims, taps: &[f64]) -> WindowStats {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mu_x, od) = filter_valid(x, dims, taps);
    let (mu_y, _) = filter_valid(y, dims, taps);
    let (exx, _) = filter_valid(&xx, dims, taps);
    let (eyy, _) = filter_valid(&yy, dims, taps);
    let (exy, _) = filter_valid(&xy, dims, taps);
    let var_x = exx.iter().zip(&mu_x).map(|(e, m)| (e - m * m).max(0.0)).collect();
    let var_y = eyy.iter().zip(&mu_y).map(|(e, m)| (e - m * m).max(0.0)).collect();
    let cov_xy = exy
        .iter()
        .zip(mu_x.iter().zip(&mu_y))
        .map(|(e, (a, b))| e - a * b)
        .collect();
    WindowStats {
        dims: od,
        mu_x,
        mu_y,
        var_x,
        var_y,
        cov_xy,
    }
}

/// Local window statistics of two same-sized volumes at full resolution.
pub fn window_stats(a: &Volume3D, b: &Volume3D, cfg: &MsSsimConfig) -> Result<WindowStats> {
    ensure_same_dims(a, b)?;
    cfg.validate()?;
    check_size(a.dims(), 1, cfg.window_size)?;
    Ok(stats(a.data(), b.data(), a.dims(), &cfg.window()))
}

fn check_size(dims: Dims, scale: usize, window: usize) -> Result<()> {
    for (axis, &size) in dims.iter().enumerate() {
        if size < window {
            return Err(MetricError::VolumeTooSmall {
                scale,
                axis,
                size,
                window,
            });
        }
    }
    Ok(())
}

fn pool2(src: &[f64], dims: Dims) -> (Vec<f64>, Dims) {
    let od = [dims[0] / 2, dims[1] / 2, dims[2] / 2];
    let mut out = Vec::with_capacity(od[0] * od[1] * od[2]);
    for z in 0..od[2] {
        for y in 0..od[1] {
            for x in 0..od[0] {
                let mut s = 0.0;
                for dz in 0..2 {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            s += src[(2 * x + dx) + dims[0] * ((2 * y + dy) + dims[1] * (2 * z + dz))];
                        }
                    }
                }
                out.push(s / 8.0);
            }
        }
    }
    (out, od)
}

fn mean_map<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    par_sum(n, f) / n as f64
}

/// Multi-scale SSIM of two volumes.
pub fn ms_ssim(a: &Volume3D, b: &Volume3D, cfg: &MsSsimConfig) -> Result<f64> {
    ensure_same_dims(a, b)?;
    cfg.validate()?;
    let scales = cfg.scales();
    let mut d = a.dims();
    for scale in 1..=scales {
        check_size(d, scale, cfg.window_size)?;
        d = [d[0] / 2, d[1] / 2, d[2] / 2];
    }

    let taps = cfg.window();
    let weights = cfg.effective_weights();
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let mut x = a.data().to_vec();
    let mut y = b.data().to_vec();
    let mut dims = a.dims();
    let mut result = 1.0;
    for (j, &beta) in weights.iter().enumerate() {
        let s = stats(&x, &y, dims, &taps);
        let n = s.mu_x.len();
        let cs = |i: usize| (2.0 * s.cov_xy[i] + c2) / (s.var_x[i] + s.var_y[i] + c2);
        let term = if j + 1 < scales {
            mean_map(n, cs)
        } else {
            mean_map(n, |i| {
                let (mx, my) = (s.mu_x[i], s.mu_y[i]);
                (2.0 * mx * my + c1) / (mx * mx + my * my + c1) * cs(i)
            })
        };
        result *= term.max(0.0).powf(beta);
        if j + 1 < scales {
            let (nx, nd) = pool2(&x, dims);
            let (ny, _) = pool2(&y, dims);
            x = nx;
            y = ny;
            dims = nd;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(dims: Dims, seed: u64) -> Volume3D {
        Volume3D::from_fn(dims, [1.0; 3], |x, y, z| {
            let mut h = seed ^ ((x as u64) << 40 | (y as u64) << 20 | z as u64);
            h = h.wrapping_mul(0x9E3779B97F4A7C15);
            h ^= h >> 29;
            h = h.wrapping_mul(0xBF58476D1CE4E5B9);
            h ^= h >> 32;
            (h >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap()
    }

    #[test]
    fn default_window_sums_to_one() {
        let w = MsSsimConfig::default().window();
        assert_eq!(w.len(), 11);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_volumes_score_one() {
        let a = noise([44, 44, 44], 1);
        assert!((ms_ssim(&a, &a, &MsSsimConfig::default()).unwrap() - 1.0).abs() < 1e-12);
        let c = Volume3D::filled([44, 44, 44], [1.0; 3], 0.3).unwrap();
        assert!((ms_ssim(&c, &c.clone(), &MsSsimConfig::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_small_names_scale_and_axis() {
        let a = noise([44, 44, 32], 2);
        match ms_ssim(&a, &a, &MsSsimConfig::default()) {
            Err(MetricError::VolumeTooSmall { scale, axis, size, window }) => {
                assert_eq!((scale, axis, size, window), (3, 2, 8, 11));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn renormalized_weights_sum_to_one() {
        let cfg = MsSsimConfig {
            renormalize_weights: true,
            ..Default::default()
        };
        assert!((cfg.effective_weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_config() {
        let cfg = MsSsimConfig {
            window_size: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = MsSsimConfig {
            weights: vec![0.5, 0.0],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn variance_is_clamped() {
        let a = Volume3D::filled([11, 11, 11], [1.0; 3], 0.1).unwrap();
        let s = window_stats(&a, &a, &MsSsimConfig::default()).unwrap();
        assert_eq!(s.dims, [1, 1, 1]);
        assert!(s.var_x[0] >= 0.0);
    }
}
