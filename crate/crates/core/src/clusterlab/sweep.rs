use serde::{Deserialize, Serialize};

use super::{davies_bouldin, kmeans_values, silhouette_score, ClusterError, KMeansOptions};
use super::validity::DEFAULT_SILHOUETTE_CAP;
use crate::volcore::Volume3D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub kmeans: KMeansOptions,
    /// Voxels sampled for the silhouette score (0 = all).
    pub sample_cap: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            kmeans: KMeansOptions::default(),
            sample_cap: DEFAULT_SILHOUETTE_CAP,
        }
    }
}

/// One cluster count's scores. Metric fields are `None` when the row failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub silhouette: Option<f64>,
    pub dbi: Option<f64>,
    pub inertia: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepReport {
    pub seed: u64,
    pub sample_cap: usize,
    pub n_voxels: usize,
    pub rows: Vec<SweepRow>,
}

impl KSweepReport {
    /// Row with the highest silhouette among successful rows.
    pub fn best_by_silhouette(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.silhouette.is_some())
            .max_by(|a, b| a.silhouette.unwrap().total_cmp(&b.silhouette.unwrap()))
    }

    /// Row with the lowest Davies-Bouldin index among successful rows.
    pub fn best_by_dbi(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.dbi.is_some())
            .min_by(|a, b| a.dbi.unwrap().total_cmp(&b.dbi.unwrap()))
    }

    /// CSV with header `k,silhouette,dbi,inertia`; failed rows leave the
    /// metric cells empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "silhouette", "dbi", "inertia"]).expect("in-memory write");
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([r.k.to_string(), cell(r.silhouette), cell(r.dbi), cell(r.inertia)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Runs k-means for every `k` in `k_min..=k_max` and scores each clustering.
pub fn sweep_k(
    v: &Volume3D,
    k_min: usize,
    k_max: usize,
    seed: u64,
    opts: SweepOptions,
) -> Result<KSweepReport, ClusterError> {
    if k_min < 2 || k_max < k_min {
        return Err(ClusterError::InvalidRange { k_min, k_max });
    }
    let values = v.data();
    let rows = (k_min..=k_max)
        .map(|k| {
            let scored = kmeans_values(values, k, seed, opts.kmeans).and_then(|r| {
                let s = silhouette_score(values, &r.assignments, opts.sample_cap, seed)?;
                let d = davies_bouldin(values, &r.assignments)?;
                Ok((s, d, r.inertia))
            });
            match scored {
                Ok((s, d, i)) => SweepRow {
                    k,
                    silhouette: Some(s),
                    dbi: Some(d),
                    inertia: Some(i),
                    error: None,
                },
                Err(e) => SweepRow {
                    k,
                    silhouette: None,
                    dbi: None,
                    inertia: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(KSweepReport {
        seed,
        sample_cap: opts.sample_cap,
        n_voxels: values.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_k_range_gives_one_row() {
        let v = Volume3D::from_fn([8, 8, 2], [1.0; 3], |x, _, _| if x < 4 { 0.1 } else { 0.9 }).unwrap();
        let r = sweep_k(&v, 2, 2, 1, SweepOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].k, 2);
    }

    #[test]
    fn failed_rows_are_marked() {
        let v = Volume3D::from_fn([4, 1, 1], [1.0; 3], |x, _, _| (x % 2) as f64).unwrap();
        let r = sweep_k(&v, 2, 3, 1, SweepOptions::default()).unwrap();
        assert!(r.rows[0].error.is_none());
        assert!(r.rows[1].error.is_some());
        assert!(r.to_csv().lines().nth(2).unwrap().starts_with("3,,,"));
    }

    #[test]
    fn invalid_range() {
        let v = Volume3D::filled([2, 1, 1], [1.0; 3], 0.0).unwrap();
        assert!(sweep_k(&v, 1, 3, 0, SweepOptions::default()).is_err());
        assert!(sweep_k(&v, 4, 3, 0, SweepOptions::default()).is_err());
    }
}
