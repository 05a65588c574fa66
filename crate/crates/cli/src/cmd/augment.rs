use std::path::PathBuf;

use lge_synthlab::augment::{apply, derive_seed, sample_plan, AugmentConfig, AugmentError, AugmentPlan};
use lge_synthlab::volcore::{normalize_intensity, save_labels, save_volume};

use super::{read_labels, read_volume};
use crate::error::{data, CliError, CliResult};
use crate::output::emit;
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    volume: PathBuf,
    /// Label mask transformed alongside the volume (spatial ops only).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Augmentation config (TOML or JSON). Defaults apply when omitted.
    #[arg(long, conflicts_with = "plan")]
    config: Option<PathBuf>,
    /// Replay a previously written plan instead of sampling one.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Position of this volume in a batch; the plan seed is `seed ^ index`.
    #[arg(long, default_value_t = 0)]
    index: u64,
    /// Min-max normalize the volume first (gamma needs [0, 1] data).
    #[arg(long)]
    normalize: bool,
    /// Output path for the transformed mask.
    #[arg(long, requires = "mask")]
    mask_out: Option<PathBuf>,
    /// Where to write the plan JSON.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

fn config_error(e: AugmentError) -> CliError {
    match e {
        AugmentError::InvalidRange { .. } | AugmentError::InvalidProbability { .. } | AugmentError::Config(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Data(other.to_string()),
    }
}

pub fn run(g: &Global, a: Args) -> CliResult {
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("augment needs --out for the volume".into()))?;
    let plan = match &a.plan {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(data(p.display()))?;
            AugmentPlan::from_json(&text).map_err(data(p.display()))?
        }
        None => {
            let cfg = match &a.config {
                Some(p) => AugmentConfig::from_path(p).map_err(config_error)?,
                None => AugmentConfig::default(),
            };
            sample_plan(derive_seed(g.seed, a.index), &cfg).map_err(config_error)?
        }
    };

    let mut v = read_volume(&a.volume)?;
    if a.normalize {
        v = normalize_intensity(&v).map_err(data(a.volume.display()))?;
    }
    let mask = a.mask.as_deref().map(read_labels).transpose()?;
    let (v2, m2) = apply(&plan, &v, mask.as_ref()).map_err(data("augmentation"))?;

    save_volume(&v2, out).map_err(data(out.display()))?;
    if let (Some(m), Some(path)) = (m2, &a.mask_out) {
        save_labels(&m, path).map_err(data(path.display()))?;
    }
    if let Some(p) = &a.plan_out {
        emit(&(plan.to_json() + "\n"), Some(p))?;
    }
    Ok(())
}
