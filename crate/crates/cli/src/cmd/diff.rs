use std::path::PathBuf;

use clap::Subcommand;
use lge_synthlab::diffmath::{
    cfg_blend, cosine_schedule, denoise_loss, forward_noise, load_tensor, save_tensor, LatentTensor,
    DEFAULT_COSINE_OFFSET,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{data, CliError, CliResult};
use crate::output::{emit, to_json, Format};
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(subcommand)]
    op: Op,
}

#[derive(Debug, Subcommand)]
enum Op {
    /// Print the cosine schedule as (t, beta, alpha_bar).
    Schedule {
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_COSINE_OFFSET)]
        offset: f64,
    },
    /// Noise a latent to step t. Draws Gaussian noise from --seed unless --eps is given.
    Noise {
        #[arg(long)]
        latent: PathBuf,
        #[arg(long)]
        eps: Option<PathBuf>,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_COSINE_OFFSET)]
        offset: f64,
    },
    /// Mean squared error between true and predicted noise.
    Loss {
        #[arg(long = "true")]
        eps_true: PathBuf,
        #[arg(long = "pred")]
        eps_pred: PathBuf,
    },
    /// Classifier-free guidance blend.
    Blend {
        #[arg(long)]
        uncond: PathBuf,
        #[arg(long)]
        cond: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        w: f64,
    },
}

#[derive(Serialize)]
struct ScheduleRow {
    t: usize,
    beta: f64,
    alpha_bar: f64,
}

fn read(p: &PathBuf) -> CliResult<LatentTensor> {
    load_tensor(p).map_err(data(p.display()))
}

fn write(t: &LatentTensor, g: &Global) -> CliResult {
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("this operation needs --out".into()))?;
    save_tensor(t, out).map_err(data(out.display()))
}

pub fn run(g: &Global, a: Args) -> CliResult {
    match a.op {
        Op::Schedule { steps, offset } => {
            let s = cosine_schedule(steps, offset).map_err(|e| CliError::Usage(e.to_string()))?;
            let rows: Vec<ScheduleRow> = (1..=steps)
                .map(|t| ScheduleRow {
                    t,
                    beta: s.betas()[t - 1],
                    alpha_bar: s.alpha_bars()[t],
                })
                .collect();
            let text = match g.format {
                Format::Json => to_json(&rows)?,
                Format::Csv | Format::Table => {
                    let sep = if g.format == Format::Csv { ',' } else { '\t' };
                    let mut out = format!("t{sep}beta{sep}alpha_bar\n");
                    for r in &rows {
                        out.push_str(&format!("{}{sep}{}{sep}{}\n", r.t, r.beta, r.alpha_bar));
                    }
                    out
                }
            };
            emit(&text, g.out.as_deref())
        }
        Op::Noise {
            latent,
            eps,
            t,
            steps,
            offset,
        } => {
            let s = cosine_schedule(steps, offset).map_err(|e| CliError::Usage(e.to_string()))?;
            let z = read(&latent)?;
            let e = match &eps {
                Some(p) => read(p)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                    let data = (0..z.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                    LatentTensor::new(z.shape().to_vec(), data).map_err(|e| CliError::Internal(e.to_string()))?
                }
            };
            let zt = forward_noise(&z, t, &s, &e).map_err(|e| CliError::Usage(e.to_string()))?;
            write(&zt, g)
        }
        Op::Loss { eps_true, eps_pred } => {
            let l = denoise_loss(&read(&eps_true)?, &read(&eps_pred)?).map_err(data("loss"))?;
            let text = match g.format {
                Format::Json => to_json(&serde_json::json!({ "loss": l }))?,
                _ => format!("{l}\n"),
            };
            emit(&text, g.out.as_deref())
        }
        Op::Blend { uncond, cond, w } => {
            let out = cfg_blend(&read(&uncond)?, &read(&cond)?, w).map_err(data("blend"))?;
            write(&out, g)
        }
    }
}
