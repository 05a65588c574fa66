use std::path::PathBuf;

use lge_synthlab::clusterlab::{sweep_k, KMeansOptions, SweepOptions, DEFAULT_SILHOUETTE_CAP};

use super::prepare;
use crate::error::{CliError, CliResult};
use crate::output::{emit, to_json, Format};
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    volume: PathBuf,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Voxels sampled for the silhouette score (0 = all).
    #[arg(long, default_value_t = DEFAULT_SILHOUETTE_CAP)]
    sample_cap: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

pub fn run(g: &Global, a: Args) -> CliResult {
    if a.k_min < 2 || a.k_max < a.k_min {
        return Err(CliError::Usage(format!(
            "need 2 <= k-min <= k-max, got {}..={}",
            a.k_min, a.k_max
        )));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(CliError::Usage(format!("sigma must be non-negative, got {}", a.sigma)));
    }
    let (_, smoothed) = prepare(&a.volume, a.sigma)?;
    let opts = SweepOptions {
        kmeans: KMeansOptions {
            max_iters: a.max_iters,
            tol: a.tol,
        },
        sample_cap: a.sample_cap,
    };
    let report = sweep_k(&smoothed, a.k_min, a.k_max, g.seed, opts)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let text = match g.format {
        Format::Json => to_json(&report)?,
        Format::Csv => report.to_csv(),
        Format::Table => report.to_csv().replace(',', "\t"),
    };
    emit(&text, g.out.as_deref())
}
