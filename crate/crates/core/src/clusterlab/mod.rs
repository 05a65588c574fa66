//! Intensity k-means over (smoothed) volumes and cluster-count selection
//! with the silhouette score and the Davies-Bouldin index.

mod kmeans;
mod sweep;
mod validity;

use thiserror::Error;

pub use kmeans::{kmeans, kmeans_values, ClusterModel, KMeansOptions, KMeansResult};
pub use sweep::{sweep_k, KSweepReport, SweepOptions, SweepRow};
pub use validity::{davies_bouldin, silhouette_score, DEFAULT_SILHOUETTE_CAP};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("need at least {k} distinct intensities, found {found}")]
    TooFewDistinctValues { k: usize, found: usize },
    #[error("cluster {cluster} is empty after reseeding")]
    DegenerateClusters { cluster: usize },
    #[error("fewer than two clusters present")]
    SingleCluster,
    #[error("clusters {a} and {b} share the same centroid")]
    CoincidentCentroids { a: u32, b: u32 },
    #[error("values and assignments differ in length ({values} vs {assignments})")]
    LengthMismatch { values: usize, assignments: usize },
    #[error("invalid k range {k_min}..={k_max}")]
    InvalidRange { k_min: usize, k_max: usize },
}
