use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::util::{CompensatedSum, REDUCE_CHUNK};
use crate::volcore::{LabelMap3D, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iters: usize,
    /// Relative inertia change below which iteration stops.
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            tol: 1e-4,
        }
    }
}

/// Outcome of 1D k-means on a flat slice of values.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Strictly ascending; cluster 0 is the darkest.
    pub centroids: Vec<f64>,
    pub assignments: Vec<u32>,
    pub inertia: f64,
    /// Inertia after each assignment step, starting with the seeding.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// k-means model over a volume grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<f64>,
    pub assignments: LabelMap3D,
    pub inertia: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// `false` when `max_iters` was reached before the tolerance.
    pub converged: bool,
}

impl ClusterModel {
    /// Builds a model from an explicit assignment map; centroids are the
    /// per-cluster mean of `values` (0 for empty clusters).
    pub fn from_assignments(values: &Volume3D, assignments: LabelMap3D, k: usize) -> Self {
        let mut sums = vec![CompensatedSum::new(); k];
        let mut counts = vec![0usize; k];
        for (&v, &a) in values.data().iter().zip(assignments.labels()) {
            sums[a as usize].add(v);
            counts[a as usize] += 1;
        }
        let centroids: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s.value() / c as f64 })
            .collect();
        let inertia = inertia_of(values.data(), assignments.labels(), &centroids);
        Self {
            k,
            centroids,
            assignments,
            inertia,
            trace: vec![inertia],
            iterations: 0,
            converged: true,
        }
    }
}

#[inline]
fn nearest(x: f64, centroids: &[f64]) -> (u32, f64) {
    let mut best = 0u32;
    let mut best_d = (x - centroids[0]) * (x - centroids[0]);
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = (x - c) * (x - c);
        // strict comparison keeps the lowest index on ties
        if d < best_d {
            best = j as u32;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Assigns every value to its nearest centroid and returns the inertia.
fn assign(values: &[f64], centroids: &[f64], out: &mut [u32]) -> f64 {
    let partials: Vec<CompensatedSum> = out
        .par_chunks_mut(REDUCE_CHUNK)
        .zip(values.par_chunks(REDUCE_CHUNK))
        .map(|(a, v)| {
            let mut s = CompensatedSum::new();
            for (slot, &x) in a.iter_mut().zip(v) {
                let (j, d) = nearest(x, centroids);
                *slot = j;
                s.add(d);
            }
            s
        })
        .collect();
    let mut total = CompensatedSum::new();
    partials.iter().for_each(|p| total.merge(p));
    total.value()
}

fn inertia_of(values: &[f64], assignments: &[u32], centroids: &[f64]) -> f64 {
    crate::util::par_sum(values.len(), |i| {
        let d = values[i] - centroids[assignments[i] as usize];
        d * d
    })
}

/// Per-cluster sums and counts, reduced in fixed chunk order.
fn cluster_stats(values: &[f64], assignments: &[u32], k: usize) -> (Vec<f64>, Vec<usize>) {
    let partials: Vec<(Vec<CompensatedSum>, Vec<usize>)> = values
        .par_chunks(REDUCE_CHUNK)
        .zip(assignments.par_chunks(REDUCE_CHUNK))
        .map(|(v, a)| {
            let mut sums = vec![CompensatedSum::new(); k];
            let mut counts = vec![0usize; k];
            for (&x, &j) in v.iter().zip(a) {
                sums[j as usize].add(x);
                counts[j as usize] += 1;
            }
            (sums, counts)
        })
        .collect();
    let mut sums = vec![CompensatedSum::new(); k];
    let mut counts = vec![0usize; k];
    for (ps, pc) in &partials {
        for j in 0..k {
            sums[j].merge(&ps[j]);
            counts[j] += pc[j];
        }
    }
    (sums.iter().map(|s| s.value()).collect(), counts)
}

fn count_distinct_up_to(values: &[f64], k: usize) -> usize {
    let mut seen: Vec<f64> = Vec::with_capacity(k);
    for &v in values {
        if !seen.contains(&v) {
            seen.push(v);
            if seen.len() >= k {
                break;
            }
        }
    }
    seen.len()
}

/// k-means++ seeding: first centre uniform, then proportional to the squared
/// distance to the closest chosen centre.
fn seed_centroids(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = values.len();
    let mut centroids = vec![values[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = values
        .iter()
        .map(|&x| (x - centroids[0]) * (x - centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            acc += w;
            if w > 0.0 && acc > target {
                pick = Some(i);
                break;
            }
        }
        // rounding can leave `target` just above the final partial sum
        let pick = pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("distinct values remain"));
        let c = values[pick];
        centroids.push(c);
        d2.par_iter_mut().zip(values.par_iter()).for_each(|(d, &x)| {
            let e = (x - c) * (x - c);
            if e < *d {
                *d = e;
            }
        });
    }
    centroids
}

fn sort_centroids(centroids: &mut [f64]) {
    centroids.sort_by(|a, b| a.total_cmp(b));
}

fn check_distinct(centroids: &[f64]) -> Result<(), ClusterError> {
    for j in 1..centroids.len() {
        if centroids[j] <= centroids[j - 1] {
            return Err(ClusterError::DegenerateClusters { cluster: j });
        }
    }
    Ok(())
}

/// Moves each empty cluster onto the value farthest from its assigned
/// centroid, then reassigns once. A cluster that is still empty is an error.
fn repair_empty(
    values: &[f64],
    centroids: &mut Vec<f64>,
    assignments: &mut [u32],
) -> Result<f64, ClusterError> {
    let k = centroids.len();
    let (_, counts) = cluster_stats(values, assignments, k);
    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if empty.is_empty() {
        return Ok(inertia_of(values, assignments, centroids));
    }
    let mut taken: Vec<usize> = Vec::new();
    for &j in &empty {
        let far = values
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken.contains(i))
            .map(|(i, &x)| (i, (x - centroids[assignments[i] as usize]).abs()))
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = far {
            taken.push(i);
            centroids[j] = values[i];
        }
    }
    sort_centroids(centroids);
    let inertia = assign(values, centroids, assignments);
    let (_, counts) = cluster_stats(values, assignments, k);
    if let Some(j) = (0..k).find(|&j| counts[j] == 0) {
        return Err(ClusterError::DegenerateClusters { cluster: j });
    }
    Ok(inertia)
}

/// Lloyd's k-means on scalar values with k-means++ seeding.
///
/// Centroids are kept sorted ascending so label 0 is always the darkest
/// cluster. The returned inertia trace is non-increasing: a Lloyd step that
/// would raise inertia (possible only through rounding at a fixed point) is
/// treated as convergence and discarded.
pub fn kmeans_values(
    values: &[f64],
    k: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<KMeansResult, ClusterError> {
    if k == 0 {
        return Err(ClusterError::InvalidK);
    }
    let found = count_distinct_up_to(values, k);
    if found < k {
        return Err(ClusterError::TooFewDistinctValues { k, found });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(values, k, &mut rng);
    sort_centroids(&mut centroids);
    let mut assignments = vec![0u32; values.len()];
    assign(values, &centroids, &mut assignments);
    let mut inertia = repair_empty(values, &mut centroids, &mut assignments)?;
    check_distinct(&centroids)?;

    let mut trace = vec![inertia];
    let mut iterations = 0;
    let mut converged = false;
    let mut next_assign = vec![0u32; values.len()];
    while iterations < opts.max_iters {
        iterations += 1;
        let (sums, counts) = cluster_stats(values, &assignments, k);
        let mut next: Vec<f64> = (0..k)
            .map(|j| if counts[j] > 0 { sums[j] / counts[j] as f64 } else { centroids[j] })
            .collect();
        sort_centroids(&mut next);
        assign(values, &next, &mut next_assign);
        let next_inertia = repair_empty(values, &mut next, &mut next_assign)?;
        if next_inertia > inertia {
            converged = true;
            break;
        }
        let change = inertia - next_inertia;
        centroids = next;
        std::mem::swap(&mut assignments, &mut next_assign);
        inertia = next_inertia;
        trace.push(inertia);
        if inertia == 0.0 || change / inertia < opts.tol {
            converged = true;
            break;
        }
    }
    check_distinct(&centroids)?;
    Ok(KMeansResult {
        centroids,
        assignments,
        inertia,
        trace,
        iterations,
        converged,
    })
}

/// k-means over every voxel of `v`. Smoothing, if wanted, is the caller's
/// job; the assignment map lives on `v`'s grid.
pub fn kmeans(
    v: &Volume3D,
    k: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<ClusterModel, ClusterError> {
    let r = kmeans_values(v.data(), k, seed, opts)?;
    let assignments =
        LabelMap3D::from_grid(v.grid(), r.assignments).expect("assignment length matches grid");
    Ok(ClusterModel {
        k,
        centroids: r.centroids,
        assignments,
        inertia: r.inertia,
        trace: r.trace,
        iterations: r.iterations,
        converged: r.converged,
    })
}
