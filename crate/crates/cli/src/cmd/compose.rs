use std::path::PathBuf;

use lge_synthlab::clusterlab::{kmeans, KMeansOptions};
use lge_synthlab::composite::{compose, validate_composite};
use lge_synthlab::volcore::save_labels;
use lge_synthlab::MaskPair;
use log::{info, warn};

use super::{prepare, read_labels};
use crate::error::{data, CliError, CliResult};
use crate::output::{emit, to_json};
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Intensity volume (.nii or .raw with .json sidecar).
    #[arg(long)]
    volume: PathBuf,
    /// Binary endocardium mask.
    #[arg(long)]
    endo: PathBuf,
    /// Binary wall mask.
    #[arg(long)]
    wall: PathBuf,
    /// Number of intensity clusters.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Gaussian smoothing before clustering, in voxels.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Where to write the JSON trace (stdout when omitted).
    #[arg(long)]
    trace: Option<PathBuf>,
}

pub const K_MAX: usize = 10;

pub fn run(g: &Global, a: Args) -> CliResult {
    if !(2..=K_MAX).contains(&a.k) {
        return Err(CliError::Usage(format!("k must be in 2..={K_MAX} for composition, got {}", a.k)));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(CliError::Usage(format!("sigma must be non-negative, got {}", a.sigma)));
    }
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("compose needs --out for the label map".into()))?;

    let (normalized, smoothed) = prepare(&a.volume, a.sigma)?;
    let endo = read_labels(&a.endo)?;
    let wall = read_labels(&a.wall)?;
    let masks = MaskPair::from_label_maps(&endo, &wall).map_err(data("masks"))?;
    let opts = KMeansOptions {
        max_iters: a.max_iters,
        tol: a.tol,
    };
    let model = kmeans(&smoothed, a.k, g.seed, opts).map_err(data("clustering"))?;
    info!("k-means converged={} after {} iterations", model.converged, model.iterations);
    // zero detection looks at the unsmoothed normalized volume
    let trace = compose(&normalized, &masks, &model).map_err(data("composition"))?;

    let report = validate_composite(&trace, &masks);
    for w in &report.warnings {
        warn!("{w}");
    }
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(CliError::Internal(format!(
            "invariant {} failed: {}",
            bad.name,
            bad.detail.as_deref().unwrap_or("")
        )));
    }
    if trace.background.fallback {
        warn!("no zero-intensity voxel found; background is the lowest-centroid cluster");
    }
    save_labels(&trace.final_map, out).map_err(data(out.display()))?;
    emit(&to_json(&trace.record())?, a.trace.as_deref())
}
