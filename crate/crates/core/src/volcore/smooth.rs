//! Separable Gaussian smoothing with half-sample symmetric (reflective)
//! borders. The kernel is truncated at radius `ceil(3 sigma)` and
//! renormalized to unit sum.

use rayon::prelude::*;

use super::{Result, Volume3D, VolumeError};

/// Normalized 1D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Maps an out-of-range index onto `0..n` by mirroring about the borders
/// (`.. 1 0 | 0 1 .. n-1 | n-1 n-2 ..`).
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

/// Convolves along one axis. `stride` is the index distance between
/// neighbours on that axis.
fn convolve_axis(src: &[f64], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f64> {
    let n = dims[axis];
    let r = (kernel.len() / 2) as i64;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let stride = strides[axis];
    let plane = dims[0] * dims[1];
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let pos = [x, y, z][axis] as i64;
                let base = x + dims[0] * y + plane * z - pos as usize * stride;
                let mut acc = 0.0;
                for (t, &w) in kernel.iter().enumerate() {
                    let j = reflect(pos + t as i64 - r, n);
                    acc += w * src[base + j * stride];
                }
                slab[x + dims[0] * y] = acc;
            }
        }
    });
    out
}

/// Gaussian smoothing with standard deviation `sigma` in voxels. `sigma = 0`
/// returns the input unchanged.
pub fn gaussian_smooth(v: &Volume3D, sigma: f64) -> Result<Volume3D> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(VolumeError::InvalidArgument(format!(
            "sigma must be a finite non-negative number, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let dims = v.dims();
    let mut data = v.data().to_vec();
    for axis in 0..3 {
        if dims[axis] > 1 {
            data = convolve_axis(&data, dims, axis, &kernel);
        }
    }
    Ok(v.with_data(data))
}
