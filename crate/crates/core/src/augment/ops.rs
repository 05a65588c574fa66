//! Implementations of the individual augmentation ops.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{AugmentError, AugmentOp, Result};
use crate::volcore::{gaussian_smooth, Dims, Grid, LabelMap3D, Volume3D};

/// Coordinates this close to an integer are snapped onto it, so rotations
/// by multiples of 90 degrees land exactly on the grid.
const SNAP: f64 = 1e-9;

/// Exponents `(i, j, k)` with `1 <= i + j + k <= order`, by total degree and
/// then lexicographically.
pub fn monomials(order: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for deg in 1..=order {
        for i in (0..=deg).rev() {
            for j in (0..=deg - i).rev() {
                out.push([i, j, deg - i - j]);
            }
        }
    }
    out
}

fn snap(c: f64) -> f64 {
    let r = c.round();
    if (c - r).abs() < SNAP {
        r
    } else {
        c
    }
}

/// Source coordinate (in voxels) for every output voxel.
fn source_coords<F>(dims: Dims, f: F) -> Vec<[f64; 3]>
where
    F: Fn(usize, usize, usize) -> [f64; 3] + Sync,
{
    let plane = dims[0] * dims[1];
    let mut out = vec![[0.0; 3]; plane * dims[2]];
    out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                slab[x + dims[0] * y] = f(x, y, z).map(snap);
            }
        }
    });
    out
}

fn trilinear(data: &[f64], dims: Dims, p: [f64; 3]) -> f64 {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut fr = [0.0; 3];
    for a in 0..3 {
        let max = (dims[a] - 1) as f64;
        if !(p[a] >= 0.0 && p[a] <= max) {
            return 0.0;
        }
        let l = p[a].floor();
        lo[a] = l as usize;
        hi[a] = (lo[a] + 1).min(dims[a] - 1);
        fr[a] = p[a] - l;
    }
    let at = |x: usize, y: usize, z: usize| data[x + dims[0] * (y + dims[1] * z)];
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
    let c00 = lerp(at(lo[0], lo[1], lo[2]), at(hi[0], lo[1], lo[2]), fr[0]);
    let c10 = lerp(at(lo[0], hi[1], lo[2]), at(hi[0], hi[1], lo[2]), fr[0]);
    let c01 = lerp(at(lo[0], lo[1], hi[2]), at(hi[0], lo[1], hi[2]), fr[0]);
    let c11 = lerp(at(lo[0], hi[1], hi[2]), at(hi[0], hi[1], hi[2]), fr[0]);
    lerp(lerp(c00, c10, fr[1]), lerp(c01, c11, fr[1]), fr[2])
}

fn nearest(labels: &[u32], dims: Dims, p: [f64; 3]) -> u32 {
    let mut idx = [0usize; 3];
    for a in 0..3 {
        let r = p[a].round();
        if !(r >= 0.0 && r <= (dims[a] - 1) as f64) {
            return 0;
        }
        idx[a] = r as usize;
    }
    labels[idx[0] + dims[0] * (idx[1] + dims[1] * idx[2])]
}

fn rotation(deg: [f64; 3]) -> [[f64; 3]; 3] {
    let [ax, ay, az] = deg.map(f64::to_radians);
    let (sx, cx) = ax.sin_cos();
    let (sy, cy) = ay.sin_cos();
    let (sz, cz) = az.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    matmul(rz, matmul(ry, rx))
}

fn matmul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn affine_coords(grid: &Grid, rot: [f64; 3], scale: f64, t: [f64; 3]) -> Vec<[f64; 3]> {
    let r = rotation(rot);
    let c = grid.dims.map(|n| (n as f64 - 1.0) / 2.0);
    let s = grid.spacing;
    source_coords(grid.dims, |x, y, z| {
        let q = [
            (x as f64 - c[0]) * s[0] - t[0],
            (y as f64 - c[1]) * s[1] - t[1],
            (z as f64 - c[2]) * s[2] - t[2],
        ];
        // inverse rotation is the transpose
        let mut out = [0.0; 3];
        for a in 0..3 {
            let p = (r[0][a] * q[0] + r[1][a] * q[1] + r[2][a] * q[2]) / scale;
            out[a] = p / s[a] + c[a];
        }
        out
    })
}

fn elastic_coords(dims: Dims, alpha: f64, sigma: f64, spacing: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    let sp = spacing as f64;
    let coarse = dims.map(|n| (n - 1).div_ceil(spacing) + 1);
    let len = coarse.iter().product::<usize>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = Vec::with_capacity(3);
    for _ in 0..3 {
        let raw: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v = Volume3D::new(coarse, [1.0; 3], raw)?;
        let smooth = gaussian_smooth(&v, sigma)?;
        fields.push(smooth.into_data());
    }
    Ok(source_coords(dims, |x, y, z| {
        let p = [x as f64 / sp, y as f64 / sp, z as f64 / sp];
        [
            x as f64 + alpha * trilinear(&fields[0], coarse, p),
            y as f64 + alpha * trilinear(&fields[1], coarse, p),
            z as f64 + alpha * trilinear(&fields[2], coarse, p),
        ]
    }))
}

/// `None` means the op is the identity for these parameters.
fn spatial_coords(op: &AugmentOp, grid: &Grid) -> Result<Option<Vec<[f64; 3]>>> {
    Ok(match *op {
        AugmentOp::Affine {
            rotation_deg,
            scale,
            translation_mm,
        } => {
            if rotation_deg == [0.0; 3] && scale == 1.0 && translation_mm == [0.0; 3] {
                None
            } else {
                Some(affine_coords(grid, rotation_deg, scale, translation_mm))
            }
        }
        AugmentOp::Elastic {
            alpha,
            sigma,
            grid_spacing,
            seed,
        } => {
            if alpha == 0.0 {
                None
            } else {
                Some(elastic_coords(grid.dims, alpha, sigma, grid_spacing, seed)?)
            }
        }
        _ => None,
    })
}

fn flip_index(dims: Dims, axes: &[usize], i: usize) -> usize {
    let mut c = [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])];
    for &a in axes {
        c[a] = dims[a] - 1 - c[a];
    }
    c[0] + dims[0] * (c[1] + dims[1] * c[2])
}

fn check_axes(axes: &[usize]) -> Result<()> {
    if axes.iter().any(|&a| a > 2) {
        return Err(AugmentError::Config(format!("flip axes must be 0..=2, got {axes:?}")));
    }
    Ok(())
}

pub(super) fn apply_mask(op: &AugmentOp, m: &LabelMap3D) -> Result<LabelMap3D> {
    let dims = m.dims();
    let src = m.labels();
    let labels = match op {
        AugmentOp::Flip { axes } => {
            check_axes(axes)?;
            (0..src.len()).map(|i| src[flip_index(dims, axes, i)]).collect()
        }
        _ => match spatial_coords(op, &m.grid())? {
            Some(coords) => coords.par_iter().map(|&p| nearest(src, dims, p)).collect(),
            None => return Ok(m.clone()),
        },
    };
    Ok(LabelMap3D::from_grid(m.grid(), labels)?)
}

pub(super) fn apply_volume(op: &AugmentOp, v: &Volume3D) -> Result<Volume3D> {
    let dims = v.dims();
    let src = v.data();
    match op {
        AugmentOp::Flip { axes } => {
            check_axes(axes)?;
            Ok(v.with_data((0..src.len()).map(|i| src[flip_index(dims, axes, i)]).collect()))
        }
        AugmentOp::Affine { .. } | AugmentOp::Elastic { .. } => match spatial_coords(op, &v.grid())? {
            Some(coords) => Ok(v.with_data(coords.par_iter().map(|&p| trilinear(src, dims, p)).collect())),
            None => Ok(v.clone()),
        },
        &AugmentOp::Gamma { gamma } => {
            if let Some(i) = src.iter().position(|x| !(0.0..=1.0).contains(x)) {
                return Err(AugmentError::UnnormalizedInput {
                    voxel: v.grid().coords(i),
                    value: src[i],
                });
            }
            if gamma == 1.0 {
                return Ok(v.clone());
            }
            Ok(v.with_data(src.par_iter().map(|x| x.powf(gamma)).collect()))
        }
        AugmentOp::BiasField {
            order, coefficients, ..
        } => {
            let terms = monomials(*order);
            if terms.len() != coefficients.len() {
                return Err(AugmentError::Config(format!(
                    "bias field of order {order} needs {} coefficients, got {}",
                    terms.len(),
                    coefficients.len()
                )));
            }
            let c = dims.map(|n| (n as f64 - 1.0) / 2.0);
            let norm = |i: usize, a: usize| if c[a] > 0.0 { (i as f64 - c[a]) / c[a] } else { 0.0 };
            let plane = dims[0] * dims[1];
            let mut out = src.to_vec();
            out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
                let w = norm(z, 2);
                for y in 0..dims[1] {
                    let vv = norm(y, 1);
                    for x in 0..dims[0] {
                        let u = norm(x, 0);
                        let poly: f64 = terms
                            .iter()
                            .zip(coefficients)
                            .map(|(e, k)| k * u.powi(e[0] as i32) * vv.powi(e[1] as i32) * w.powi(e[2] as i32))
                            .sum();
                        slab[x + dims[0] * y] *= poly.exp();
                    }
                }
            });
            Ok(v.with_data(out))
        }
        &AugmentOp::Blur { sigma } => Ok(gaussian_smooth(v, sigma)?),
        &AugmentOp::Noise { sigma, seed } => {
            if sigma == 0.0 {
                return Ok(v.clone());
            }
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(AugmentError::Config(format!("noise sigma must be non-negative, got {sigma}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = src
                .iter()
                .map(|x| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    x + sigma * n
                })
                .collect();
            Ok(v.with_data(data))
        }
    }
}
