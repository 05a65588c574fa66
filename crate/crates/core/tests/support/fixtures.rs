//! Seeded synthetic inputs shared by the integration and acceptance tests.
#![allow(dead_code)]

use lge_synthlab::{LabelMap3D, MaskPair, Volume3D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_volume(dims: [usize; 3], seed: u64) -> Volume3D {
    let mut r = rng(seed);
    let n = dims.iter().product();
    Volume3D::new(dims, [1.0; 3], (0..n).map(|_| r.random::<f64>()).collect()).unwrap()
}

/// Background of exact zeros around an ellipsoid of tissue drawn from a few
/// intensity classes, plus an endo blob and a wall shell around it.
pub struct Phantom {
    pub volume: Volume3D,
    pub endo: LabelMap3D,
    pub wall: LabelMap3D,
}

impl Phantom {
    pub fn masks(&self) -> MaskPair {
        MaskPair::from_label_maps(&self.endo, &self.wall).unwrap()
    }
}

pub fn phantom(dims: [usize; 3], spacing: [f64; 3], seed: u64) -> Phantom {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.03).unwrap();
    let c = dims.map(|n| (n as f64 - 1.0) / 2.0);
    let n = dims.iter().product::<usize>();
    let mut data = Vec::with_capacity(n);
    let mut endo = Vec::with_capacity(n);
    let mut wall = Vec::with_capacity(n);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let u = [(x as f64 - c[0]) / c[0].max(1.0), (y as f64 - c[1]) / c[1].max(1.0), (z as f64 - c[2]) / c[2].max(1.0)];
                let rr = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                let inner = ((u[0] - 0.15).powi(2) + u[1].powi(2) + u[2].powi(2)).sqrt();
                let (value, e, w): (f64, u32, u32) = if rr > 0.9 {
                    (0.0, 0, 0)
                } else if inner < 0.25 {
                    (0.55, 1, 0)
                } else if inner < 0.32 {
                    (0.85, 0, 1)
                } else if u[1] > 0.2 {
                    (0.3, 0, 0)
                } else {
                    (0.7, 0, 0)
                };
                let v: f64 = if value == 0.0 { 0.0 } else { (value + noise.sample(&mut r) as f64).clamp(0.01, 1.0) };
                data.push(v);
                endo.push(e);
                wall.push(w);
            }
        }
    }
    Phantom {
        volume: Volume3D::new(dims, spacing, data).unwrap(),
        endo: LabelMap3D::new(dims, spacing, endo).unwrap(),
        wall: LabelMap3D::new(dims, spacing, wall).unwrap(),
    }
}

/// Two well separated Gaussian intensity populations, half the voxels each.
pub fn two_gaussian(dims: [usize; 3], seed: u64) -> Volume3D {
    let mut r = rng(seed);
    let lo = Normal::new(0.25, 0.03).unwrap();
    let hi = Normal::new(0.75, 0.03).unwrap();
    let n = dims.iter().product::<usize>();
    let data = (0..n)
        .map(|i| if i % dims[0] < dims[0] / 2 { lo.sample(&mut r) } else { hi.sample(&mut r) })
        .collect();
    Volume3D::new(dims, [1.0; 3], data).unwrap()
}

/// Random small fixture: zero background, a few tissue levels with noise,
/// and random disjoint masks.
pub fn small_composite_case(seed: u64) -> (Volume3D, MaskPair) {
    let mut r = rng(seed);
    let dims = [r.random_range(3..=8), r.random_range(3..=8), r.random_range(2..=8)];
    let n = dims.iter().product::<usize>();
    let levels = [0.2, 0.45, 0.7, 0.95];
    let mut data = Vec::with_capacity(n);
    let mut endo = vec![0u8; n];
    let mut wall = vec![0u8; n];
    for i in 0..n {
        let v = if r.random::<f64>() < 0.3 {
            0.0
        } else {
            levels[r.random_range(0..levels.len())] + r.random_range(-0.05..0.05)
        };
        data.push(v);
        let m: f64 = r.random();
        if m < 0.15 {
            endo[i] = 1;
        } else if m < 0.3 {
            wall[i] = 1;
        }
    }
    // guarantee at least one unmasked zero voxel
    data[0] = 0.0;
    endo[0] = 0;
    wall[0] = 0;
    let v = Volume3D::new(dims, [1.0; 3], data).unwrap();
    let masks = MaskPair::new(v.grid(), endo, wall).unwrap();
    (v, masks)
}
