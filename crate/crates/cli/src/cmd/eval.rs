use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lge_synthlab::statsreport::{render_report, MetricsReport, ModelRow, ReportFormat, SummaryRow};
use lge_synthlab::statsreport::summarize;
use lge_synthlab::synthmetrics::{
    extract_features, fid, load_features, mmd2, ms_ssim, psnr, FeatureSet, FeatureSource, Kernel, MetricError,
    MsSsimConfig,
};
use lge_synthlab::volcore::normalize_intensity;
use lge_synthlab::Volume3D;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::read_volume;
use crate::error::{data, CliError, CliResult};
use crate::output::{emit, to_json, Format};
use crate::Global;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Dot,
    Rbf,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON array of {"real", "synthetic", "id"}; paths relative to the manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Real-image features (FEAT or headerless CSV) for FID/MMD.
    #[arg(long, requires = "synth_features")]
    real_features: Option<PathBuf>,
    #[arg(long, requires = "real_features")]
    synth_features: Option<PathBuf>,
    /// Row name in the report.
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 1.0)]
    dynamic_range: f64,
    /// MS-SSIM window edge in voxels.
    #[arg(long, default_value_t = 11)]
    window: usize,
    /// Rescale MS-SSIM weights to sum to one.
    #[arg(long)]
    renormalize_weights: bool,
    /// Min-max normalize every volume before comparing.
    #[arg(long)]
    normalize: bool,
    #[arg(long, value_enum, default_value_t = KernelKind::Dot)]
    kernel: KernelKind,
    /// RBF bandwidth; defaults to 1 / feature dimension.
    #[arg(long)]
    gamma: Option<f64>,
    /// Optional per-pair JSON output.
    #[arg(long)]
    pairs_out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    real: PathBuf,
    synthetic: PathBuf,
    id: String,
}

#[derive(Debug, Serialize)]
struct PairResult {
    id: String,
    psnr_db: Option<f64>,
    zero_mse: bool,
    ms_ssim: f64,
    #[serde(skip)]
    real_features: Vec<f64>,
    #[serde(skip)]
    synth_features: Vec<f64>,
}

fn read_manifest(path: &Path) -> CliResult<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(data(path.display()))?;
    let entries: Vec<Entry> = serde_json::from_str(&text).map_err(data(path.display()))?;
    if entries.is_empty() {
        return Err(CliError::Data(format!("{}: manifest is empty", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(entries
        .into_iter()
        .map(|e| Entry {
            real: base.join(e.real),
            synthetic: base.join(e.synthetic),
            id: e.id,
        })
        .collect())
}

fn load(path: &Path, normalize: bool) -> CliResult<Volume3D> {
    let v = read_volume(path)?;
    if normalize {
        normalize_intensity(&v).map_err(data(path.display()))
    } else {
        Ok(v)
    }
}

fn eval_pair(e: &Entry, a: &Args, cfg: &MsSsimConfig) -> CliResult<PairResult> {
    let real = load(&e.real, a.normalize)?;
    let synth = load(&e.synthetic, a.normalize)?;
    let ctx = format!("pair {}", e.id);
    let (psnr_db, zero_mse) = match psnr(&real, &synth, a.dynamic_range) {
        Ok(p) => (Some(p), false),
        Err(MetricError::ZeroMse) => (None, true),
        Err(err) => return Err(data(&ctx)(err)),
    };
    let ms = ms_ssim(&real, &synth, cfg).map_err(data(&ctx))?;
    Ok(PairResult {
        id: e.id.clone(),
        psnr_db,
        zero_mse,
        ms_ssim: ms,
        real_features: extract_features(&real),
        synth_features: extract_features(&synth),
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn run(g: &Global, a: Args) -> CliResult {
    if a.manifest.is_none() && a.real_features.is_none() {
        return Err(CliError::Usage("eval needs --manifest or --real-features/--synth-features".into()));
    }
    if !(a.dynamic_range > 0.0 && a.dynamic_range.is_finite()) {
        return Err(CliError::Usage(format!("dynamic range must be positive, got {}", a.dynamic_range)));
    }
    let cfg = MsSsimConfig {
        dynamic_range: a.dynamic_range,
        window_size: a.window,
        renormalize_weights: a.renormalize_weights,
        ..Default::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let pairs = match &a.manifest {
        Some(m) => {
            let entries = read_manifest(m)?;
            let results: Vec<CliResult<PairResult>> = entries.par_iter().map(|e| eval_pair(e, &a, &cfg)).collect();
            results.into_iter().collect::<CliResult<Vec<_>>>()?
        }
        None => Vec::new(),
    };

    let mut skipped = Vec::new();
    let (real_f, synth_f, source) = match (&a.real_features, &a.synth_features) {
        (Some(r), Some(s)) => {
            let rf = load_features(r).map_err(data(r.display()))?;
            let sf = load_features(s).map_err(data(s.display()))?;
            let src = FeatureSource::Imported(format!("{} | {}", r.display(), s.display()));
            (Some(rf), Some(sf), src)
        }
        _ => {
            let rows = |f: fn(&PairResult) -> &Vec<f64>| -> CliResult<FeatureSet> {
                let rows: Vec<Vec<f64>> = pairs.iter().map(|p| f(p).clone()).collect();
                FeatureSet::from_rows(&rows).map_err(data("descriptor features"))
            };
            (
                Some(rows(|p| &p.real_features)?),
                Some(rows(|p| &p.synth_features)?),
                FeatureSource::Descriptor,
            )
        }
    };

    let (mut fid_v, mut mmd_v) = (None, None);
    if let (Some(rf), Some(sf)) = (&real_f, &synth_f) {
        if rf.d() != sf.d() {
            return Err(CliError::Data(format!("feature dimensions differ: {} vs {}", rf.d(), sf.d())));
        }
        if rf.n() < 2 || sf.n() < 2 {
            skipped.push("fid: fewer than 2 samples per set".to_string());
            skipped.push("mmd: fewer than 2 samples per set".to_string());
        } else {
            let (mr, mg) = (rf.moments().map_err(data("real features"))?, sf.moments().map_err(data("synthetic features"))?);
            fid_v = Some(fid(&mr, &mg).map_err(data("fid"))?);
            let kernel = match a.kernel {
                KernelKind::Dot => Kernel::Dot,
                KernelKind::Rbf => Kernel::Rbf {
                    gamma: a.gamma.unwrap_or(1.0 / rf.d() as f64),
                },
            };
            mmd_v = Some(mmd2(rf, sf, kernel).map_err(data("mmd"))?);
        }
    }

    let psnrs: Vec<f64> = pairs.iter().filter_map(|p| p.psnr_db).collect();
    let ssims: Vec<f64> = pairs.iter().map(|p| p.ms_ssim).collect();
    let zero = pairs.iter().filter(|p| p.zero_mse).count();
    if pairs.is_empty() {
        skipped.push("psnr: no volume pairs".to_string());
        skipped.push("ms_ssim: no volume pairs".to_string());
    } else if psnrs.is_empty() {
        skipped.push("psnr: every pair has zero MSE".to_string());
    }
    info!("evaluated {} pairs ({} with zero MSE)", pairs.len(), zero);

    let n_volumes = if pairs.is_empty() {
        synth_f.as_ref().map_or(0, |f| f.n())
    } else {
        pairs.len()
    };
    let row = ModelRow {
        name: a.name.clone(),
        fid: fid_v,
        mmd: mmd_v,
        ms_ssim: mean(&ssims),
        psnr_db: mean(&psnrs),
        feature_source: source.to_string(),
        n_volumes,
        zero_mse_pairs: (!pairs.is_empty()).then_some(zero),
        skipped,
    };
    let mut summaries = Vec::new();
    for (name, values) in [("ms_ssim", &ssims), ("psnr_db", &psnrs)] {
        if let Ok(s) = summarize(values) {
            summaries.push(SummaryRow::new(name, &s));
        }
    }
    let report = MetricsReport {
        models: vec![row],
        tests: Vec::new(),
        summaries,
    };
    let fmt = match g.format {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
        Format::Table => ReportFormat::Table,
    };
    let text = render_report(&report, fmt).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(p) = &a.pairs_out {
        emit(&to_json(&pairs)?, Some(p))?;
    }
    emit(&text, g.out.as_deref())
}
