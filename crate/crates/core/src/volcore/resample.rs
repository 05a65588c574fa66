//! Grid-to-grid resampling.
//!
//! Source and target grids share their field-of-view centre; target voxel
//! `i` along an axis samples the source at continuous index
//! `(i - (n_out - 1) / 2) * s_out / s_in + (n_in - 1) / 2`. Positions outside
//! the source are clamped to the nearest edge voxel.

use rayon::prelude::*;

use super::{Dims, Grid, LabelMap3D, Result, Spacing, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// Per-axis lookup: lower source index, upper source index and weight of the
/// upper one.
struct AxisMap {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f64>,
}

impl AxisMap {
    fn new(n_in: usize, s_in: f64, n_out: usize, s_out: f64) -> Self {
        let c_in = (n_in as f64 - 1.0) / 2.0;
        let c_out = (n_out as f64 - 1.0) / 2.0;
        let ratio = s_out / s_in;
        let max = (n_in - 1) as f64;
        let mut lo = Vec::with_capacity(n_out);
        let mut hi = Vec::with_capacity(n_out);
        let mut frac = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let p = ((i as f64 - c_out) * ratio + c_in).clamp(0.0, max);
            let l = p.floor();
            let f = p - l;
            let l = l as usize;
            lo.push(l);
            hi.push((l + 1).min(n_in - 1));
            frac.push(f);
        }
        Self { lo, hi, frac }
    }

    #[inline]
    fn nearest(&self, i: usize) -> usize {
        if self.frac[i] >= 0.5 {
            self.hi[i]
        } else {
            self.lo[i]
        }
    }
}

fn axis_maps(src: &Grid, dims: Dims, spacing: Spacing) -> [AxisMap; 3] {
    [0, 1, 2].map(|a| AxisMap::new(src.dims[a], src.spacing[a], dims[a], spacing[a]))
}

/// Resamples an intensity volume onto a grid of `dims` voxels of size
/// `spacing`.
pub fn resample(v: &Volume3D, dims: Dims, spacing: Spacing, interp: Interpolation) -> Result<Volume3D> {
    let target = Grid::new(dims, spacing)?;
    if target == v.grid() {
        return Ok(v.clone());
    }
    let src = v.grid();
    let [mx, my, mz] = axis_maps(&src, dims, spacing);
    let data = v.data();
    let plane = dims[0] * dims[1];
    let mut out = vec![0.0; target.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let val = match interp {
                    Interpolation::Nearest => {
                        data[src.index(mx.nearest(x), my.nearest(y), mz.nearest(z))]
                    }
                    Interpolation::Trilinear => {
                        let (fx, fy, fz) = (mx.frac[x], my.frac[y], mz.frac[z]);
                        let xs = [(mx.lo[x], 1.0 - fx), (mx.hi[x], fx)];
                        let ys = [(my.lo[y], 1.0 - fy), (my.hi[y], fy)];
                        let zs = [(mz.lo[z], 1.0 - fz), (mz.hi[z], fz)];
                        let mut acc = 0.0;
                        for &(zi, wz) in &zs {
                            if wz == 0.0 {
                                continue;
                            }
                            for &(yi, wy) in &ys {
                                if wy == 0.0 {
                                    continue;
                                }
                                for &(xi, wx) in &xs {
                                    if wx == 0.0 {
                                        continue;
                                    }
                                    acc += wx * wy * wz * data[src.index(xi, yi, zi)];
                                }
                            }
                        }
                        acc
                    }
                };
                slab[x + dims[0] * y] = val;
            }
        }
    });
    Volume3D::from_grid(target, out)
}

/// Nearest-neighbour resampling of a label map. Output labels are always a
/// subset of the input labels.
pub fn resample_labels(m: &LabelMap3D, dims: Dims, spacing: Spacing) -> Result<LabelMap3D> {
    let target = Grid::new(dims, spacing)?;
    if target == m.grid() {
        return Ok(m.clone());
    }
    let src = m.grid();
    let [mx, my, mz] = axis_maps(&src, dims, spacing);
    let labels = m.labels();
    let mut out = Vec::with_capacity(target.len());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                out.push(labels[src.index(mx.nearest(x), my.nearest(y), mz.nearest(z))]);
            }
        }
    }
    LabelMap3D::from_grid(target, out)
}
