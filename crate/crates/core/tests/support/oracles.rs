//! Straight-line reference implementations used as test oracles. None of
//! these share code with the library paths they check.
#![allow(dead_code)]

/// Composite map by a literal reading of the pseudo-code:
/// zero masked cluster ids, find b as the smallest cluster owning a zero
/// voxel, take the sorted set U of remaining ids, map k to 2 + index(k),
/// then sum the mask terms and the indicator terms for k != b.
pub fn algorithm1_literal(v: &[f64], lc: &[u32], me: &[u8], mw: &[u8], k: u32) -> Vec<u32> {
    let n = v.len();
    let mut b = None;
    for cand in 0..k {
        if (0..n).any(|p| lc[p] == cand && v[p] == 0.0) {
            b = Some(cand);
            break;
        }
    }
    let mut lstar = vec![0u32; n];
    for p in 0..n {
        lstar[p] = if me[p] == 1 || mw[p] == 1 { 0 } else { lc[p] };
    }
    let mut u: Vec<u32> = lstar.clone();
    u.sort();
    u.dedup();
    let mut out = vec![0u32; n];
    for p in 0..n {
        let mut label = me[p] as u32 + 2 * mw[p] as u32;
        for (j, &kk) in u.iter().enumerate() {
            if Some(kk) != b && lstar[p] == kk {
                label += 2 + j as u32;
            }
        }
        out[p] = label;
    }
    out
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns in row-major `d x d`).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; d]; d];
    for i in 0..d {
        v[i][i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    off += m[i][j] * m[i][j];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..d {
                    let (mrp, mrq) = (m[r][p], m[r][q]);
                    m[r][p] = c * mrp - s * mrq;
                    m[r][q] = s * mrp + c * mrq;
                }
                for r in 0..d {
                    let (mpr, mqr) = (m[p][r], m[q][r]);
                    m[p][r] = c * mpr - s * mqr;
                    m[q][r] = s * mpr + c * mqr;
                }
                for r in 0..d {
                    let (vrp, vrq) = (v[r][p], v[r][q]);
                    v[r][p] = c * vrp - s * vrq;
                    v[r][q] = s * vrp + c * vrq;
                }
            }
        }
    }
    ((0..d).map(|i| m[i][i]).collect(), v)
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut c = vec![vec![0.0; d]; d];
    for i in 0..d {
        for k in 0..d {
            for j in 0..d {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn psd_root(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (w, v) = jacobi_eigen(a);
    let d = a.len();
    let mut r = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            r[i][j] = (0..d).map(|k| v[i][k] * w[k].max(0.0).sqrt() * v[j][k]).sum();
        }
    }
    r
}

/// `|mu_r - mu_g|^2 + tr(S_r) + tr(S_g) - 2 tr((root_g S_r root_g)^1/2)`.
pub fn fid_jacobi(mu_r: &[f64], s_r: &[Vec<f64>], mu_g: &[f64], s_g: &[Vec<f64>]) -> f64 {
    let d = mu_r.len();
    let dm: f64 = (0..d).map(|i| (mu_r[i] - mu_g[i]).powi(2)).sum();
    let tr = |s: &[Vec<f64>]| (0..d).map(|i| s[i][i]).sum::<f64>();
    let rg = psd_root(s_g);
    let inner = matmul(&matmul(&rg, s_r), &rg);
    let (w, _) = jacobi_eigen(&inner);
    dm + tr(s_r) + tr(s_g) - 2.0 * w.iter().map(|x| x.max(0.0).sqrt()).sum::<f64>()
}

/// Unbiased MMD² by three explicit double loops, summed left to right.
pub fn mmd2_brute(x: &[Vec<f64>], y: &[Vec<f64>], k: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let (n, m) = (x.len() as f64, y.len() as f64);
    let mut sxx = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i != j {
                sxx += k(&x[i], &x[j]);
            }
        }
    }
    let mut syy = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if i != j {
                syy += k(&y[i], &y[j]);
            }
        }
    }
    let mut sxy = 0.0;
    for xi in x {
        for yj in y {
            sxy += k(xi, yj);
        }
    }
    sxx / (n * (n - 1.0)) + syy / (m * (m - 1.0)) - 2.0 * sxy / (n * m)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn at(data: &[f64], dims: [usize; 3], x: usize, y: usize, z: usize) -> f64 {
    data[x + dims[0] * (y + dims[1] * z)]
}

/// MS-SSIM by direct summation over full 3D Gaussian windows at every
/// valid position, with 2x2x2 mean pooling between scales.
pub fn ms_ssim_direct(
    a: &[f64],
    b: &[f64],
    dims: [usize; 3],
    weights: &[f64],
    window: usize,
    sigma: f64,
    l: f64,
) -> f64 {
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let half = (window / 2) as f64;
    let g1: Vec<f64> = (0..window).map(|i| (-((i as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let mut w3 = Vec::with_capacity(window * window * window);
    for k in 0..window {
        for j in 0..window {
            for i in 0..window {
                w3.push(g1[i] * g1[j] * g1[k]);
            }
        }
    }
    let total: f64 = w3.iter().sum();
    for w in &mut w3 {
        *w /= total;
    }
    let (mut x, mut y, mut d) = (a.to_vec(), b.to_vec(), dims);
    let mut result = 1.0;
    for (s, &beta) in weights.iter().enumerate() {
        let last = s + 1 == weights.len();
        let od = [d[0] + 1 - window, d[1] + 1 - window, d[2] + 1 - window];
        let mut acc = 0.0;
        for oz in 0..od[2] {
            for oy in 0..od[1] {
                for ox in 0..od[0] {
                    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    let mut t = 0;
                    for k in 0..window {
                        for j in 0..window {
                            for i in 0..window {
                                let w = w3[t];
                                t += 1;
                                let xv = at(&x, d, ox + i, oy + j, oz + k);
                                let yv = at(&y, d, ox + i, oy + j, oz + k);
                                mx += w * xv;
                                my += w * yv;
                                sxx += w * xv * xv;
                                syy += w * yv * yv;
                                sxy += w * xv * yv;
                            }
                        }
                    }
                    let vx = (sxx - mx * mx).max(0.0);
                    let vy = (syy - my * my).max(0.0);
                    let cov = sxy - mx * my;
                    let cs = (2.0 * cov + c2) / (vx + vy + c2);
                    acc += if last {
                        (2.0 * mx * my + c1) / (mx * mx + my * my + c1) * cs
                    } else {
                        cs
                    };
                }
            }
        }
        let mean = acc / (od[0] * od[1] * od[2]) as f64;
        result *= mean.max(0.0).powf(beta);
        if !last {
            let nd = [d[0] / 2, d[1] / 2, d[2] / 2];
            let pool = |src: &[f64]| {
                let mut out = vec![0.0; nd[0] * nd[1] * nd[2]];
                for z in 0..nd[2] {
                    for yy in 0..nd[1] {
                        for xx in 0..nd[0] {
                            let mut s = 0.0;
                            for c in 0..8 {
                                s += at(src, d, 2 * xx + (c & 1), 2 * yy + ((c >> 1) & 1), 2 * z + (c >> 2));
                            }
                            out[xx + nd[0] * (yy + nd[1] * z)] = s / 8.0;
                        }
                    }
                }
                out
            };
            x = pool(&x);
            y = pool(&y);
            d = nd;
        }
    }
    result
}

/// Average ranks of |d| by counting, O(n^2).
fn ranks_by_counting(d: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|a| {
            let below = d.iter().filter(|b| b.abs() < a.abs()).count() as f64;
            let tied = d.iter().filter(|b| b.abs() == a.abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect()
}

/// One-sided exact p-values `(P(W+ >= w), P(W+ <= w))` by enumerating every
/// sign assignment. Zero differences must already be removed.
pub fn wilcoxon_enumerate(d: &[f64]) -> (f64, f64, f64) {
    let r = ranks_by_counting(d);
    let w: f64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        if s >= w - 1e-9 {
            ge += 1;
        }
        if s <= w + 1e-9 {
            le += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (w, ge as f64 / total, le as f64 / total)
}

/// Trilinear resampling with aligned field-of-view centres, one voxel at a
/// time from the definition, clamping to the edge.
pub fn resample_point(src: &[f64], dims: [usize; 3], sp_in: [f64; 3], n_out: [usize; 3], sp_out: [f64; 3], o: [usize; 3]) -> f64 {
    let mut pos = [0.0; 3];
    for a in 0..3 {
        let c_in = (dims[a] as f64 - 1.0) / 2.0;
        let c_out = (n_out[a] as f64 - 1.0) / 2.0;
        pos[a] = ((o[a] as f64 - c_out) * sp_out[a] / sp_in[a] + c_in).clamp(0.0, (dims[a] - 1) as f64);
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let lo = pos[a].floor();
            let f = pos[a] - lo;
            let hi_side = corner >> a & 1 == 1;
            idx[a] = if hi_side { (lo as usize + 1).min(dims[a] - 1) } else { lo as usize };
            w *= if hi_side { f } else { 1.0 - f };
        }
        acc += w * at(src, dims, idx[0], idx[1], idx[2]);
    }
    acc
}

/// Mean and sample standard deviation by the textbook two-pass formula.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
