//! Cluster validity indices for scalar data.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ClusterError;
use crate::util::CompensatedSum;

/// Silhouette sample size used when none is given.
pub const DEFAULT_SILHOUETTE_CAP: usize = 10_000;

/// Values of one cluster in ascending order with prefix sums, so the summed
/// distance from any point to the whole cluster costs one binary search.
struct SortedCluster {
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl SortedCluster {
    fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.total_cmp(b));
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = CompensatedSum::new();
        prefix.push(0.0);
        for &v in &values {
            acc.add(v);
            prefix.push(acc.value());
        }
        Self { values, prefix }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    /// `sum_j |x - y_j|` over the cluster.
    fn distance_sum(&self, x: f64) -> f64 {
        let below = self.values.partition_point(|&v| v < x);
        let n = self.values.len();
        let s_below = self.prefix[below];
        let s_above = self.prefix[n] - s_below;
        let lower = x * below as f64 - s_below;
        let upper = s_above - x * (n - below) as f64;
        (lower + upper).max(0.0)
    }
}

fn group(values: &[f64], assignments: &[u32]) -> BTreeMap<u32, Vec<f64>> {
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (&v, &a) in values.iter().zip(assignments) {
        groups.entry(a).or_default().push(v);
    }
    groups
}

fn check_lengths(values: &[f64], assignments: &[u32]) -> Result<(), ClusterError> {
    if values.len() != assignments.len() {
        return Err(ClusterError::LengthMismatch {
            values: values.len(),
            assignments: assignments.len(),
        });
    }
    Ok(())
}

/// Mean silhouette `s(i) = (b(i) - a(i)) / max(a(i), b(i))` over at most
/// `sample_cap` points drawn without replacement under `seed`. Points in
/// singleton clusters contribute 0, as do points with `a = b = 0`.
pub fn silhouette_score(
    values: &[f64],
    assignments: &[u32],
    sample_cap: usize,
    seed: u64,
) -> Result<f64, ClusterError> {
    check_lengths(values, assignments)?;
    let n = values.len();
    let (vals, labs): (Vec<f64>, Vec<u32>) = if sample_cap > 0 && n > sample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, sample_cap).into_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| (values[i], assignments[i])).unzip()
    } else {
        (values.to_vec(), assignments.to_vec())
    };
    let groups = group(&vals, &labs);
    if groups.len() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let ids: Vec<u32> = groups.keys().copied().collect();
    let clusters: Vec<SortedCluster> = groups.into_values().map(SortedCluster::new).collect();
    let mut total = CompensatedSum::new();
    for (&x, &l) in vals.iter().zip(&labs) {
        let own = ids.binary_search(&l).expect("label grouped");
        let size = clusters[own].len();
        if size == 1 {
            continue;
        }
        let a = clusters[own].distance_sum(x) / (size - 1) as f64;
        let b = clusters
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != own)
            .map(|(_, c)| c.distance_sum(x) / c.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total.add((b - a) / denom);
        }
    }
    Ok((total.value() / vals.len() as f64).clamp(-1.0, 1.0))
}

/// Davies-Bouldin index `(1/k) sum_i max_{j != i} (S_i + S_j) / d_ij`, with
/// `S_i` the mean distance to the centroid and `d_ij` the centroid distance.
pub fn davies_bouldin(values: &[f64], assignments: &[u32]) -> Result<f64, ClusterError> {
    check_lengths(values, assignments)?;
    let groups = group(values, assignments);
    if groups.len() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let ids: Vec<u32> = groups.keys().copied().collect();
    let (centroids, scatter): (Vec<f64>, Vec<f64>) = groups
        .values()
        .map(|g| {
            let c = g.iter().copied().collect::<CompensatedSum>().value() / g.len() as f64;
            let s = g.iter().map(|&x| (x - c).abs()).collect::<CompensatedSum>().value()
                / g.len() as f64;
            (c, s)
        })
        .unzip();
    let k = centroids.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = (centroids[i] - centroids[j]).abs();
            if d == 0.0 {
                return Err(ClusterError::CoincidentCentroids {
                    a: ids[i.min(j)],
                    b: ids[i.max(j)],
                });
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}
