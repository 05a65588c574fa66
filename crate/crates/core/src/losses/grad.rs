//! Analytic gradients of the losses with respect to the raw probability
//! entries, and a central finite-difference check.
//!
//! Every entry `p[c][i]` is treated as an independent variable, so the
//! perturbed points leave the simplex. That is fine for the check as long
//! as no entry crosses zero or the CE clamp.

use serde::{Deserialize, Serialize};

use super::{check_pair, ClassWeights, LossError, ProbMap, Result, DEFAULT_CE_CLAMP, DEFAULT_DICE_SMOOTH};
use crate::util::CompensatedSum;
use crate::volcore::LabelMap3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradLoss {
    /// `1 - mean foreground Dice`.
    SoftDice,
    CrossEntropy,
    ShapeConsistency,
    /// Mean `|p - onehot(t)|`, linear inside the simplex.
    L1,
}

struct Ctx<'a> {
    dims_n: usize,
    classes: usize,
    t: &'a [u32],
    w: Vec<f64>,
}

fn dice_loss(ctx: &Ctx, p: &[f64]) -> f64 {
    let n = ctx.dims_n;
    let mut total = 0.0;
    for c in 1..ctx.classes {
        let (mut inter, mut psum, mut tsum) = (CompensatedSum::new(), CompensatedSum::new(), 0.0);
        for i in 0..n {
            let v = p[c * n + i];
            psum.add(v);
            if ctx.t[i] as usize == c {
                inter.add(v);
                tsum += 1.0;
            }
        }
        let den = psum.value() + tsum + DEFAULT_DICE_SMOOTH;
        total += (2.0 * inter.value() + DEFAULT_DICE_SMOOTH) / den;
    }
    1.0 - total / (ctx.classes - 1) as f64
}

fn dice_grad(ctx: &Ctx, p: &[f64], g: &mut [f64]) {
    let n = ctx.dims_n;
    let scale = 1.0 / (ctx.classes - 1) as f64;
    for c in 1..ctx.classes {
        let (mut inter, mut psum, mut tsum) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let v = p[c * n + i];
            psum += v;
            if ctx.t[i] as usize == c {
                inter += v;
                tsum += 1.0;
            }
        }
        let s = psum + tsum + DEFAULT_DICE_SMOOTH;
        let num = 2.0 * inter + DEFAULT_DICE_SMOOTH;
        for i in 0..n {
            let ti = if ctx.t[i] as usize == c { 1.0 } else { 0.0 };
            g[c * n + i] -= scale * (2.0 * ti * s - num) / (s * s);
        }
    }
}

fn ce_loss(ctx: &Ctx, p: &[f64]) -> f64 {
    let n = ctx.dims_n;
    let sum: CompensatedSum = (0..n)
        .map(|i| {
            let c = ctx.t[i] as usize;
            -ctx.w[c] * p[c * n + i].max(DEFAULT_CE_CLAMP).ln()
        })
        .collect();
    sum.value() / n as f64
}

fn ce_grad(ctx: &Ctx, p: &[f64], g: &mut [f64]) {
    let n = ctx.dims_n;
    for i in 0..n {
        let c = ctx.t[i] as usize;
        let v = p[c * n + i];
        if v > DEFAULT_CE_CLAMP {
            g[c * n + i] -= ctx.w[c] / (n as f64 * v);
        }
    }
}

fn onehot(ctx: &Ctx, k: usize) -> f64 {
    let (c, i) = (k / ctx.dims_n, k % ctx.dims_n);
    if ctx.t[i] as usize == c {
        1.0
    } else {
        0.0
    }
}

fn l1_loss(ctx: &Ctx, p: &[f64]) -> f64 {
    let sum: CompensatedSum = p.iter().enumerate().map(|(k, v)| (v - onehot(ctx, k)).abs()).collect();
    sum.value() / p.len() as f64
}

fn l1_grad(ctx: &Ctx, p: &[f64], g: &mut [f64]) {
    let m = p.len() as f64;
    for (k, v) in p.iter().enumerate() {
        let d = v - onehot(ctx, k);
        if d != 0.0 {
            g[k] += d.signum() / m;
        }
    }
}

fn eval(loss: GradLoss, ctx: &Ctx, p: &[f64]) -> f64 {
    match loss {
        GradLoss::SoftDice => dice_loss(ctx, p),
        GradLoss::CrossEntropy => ce_loss(ctx, p),
        GradLoss::ShapeConsistency => dice_loss(ctx, p) + ce_loss(ctx, p),
        GradLoss::L1 => l1_loss(ctx, p),
    }
}

fn grad(loss: GradLoss, ctx: &Ctx, p: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; p.len()];
    match loss {
        GradLoss::SoftDice => dice_grad(ctx, p, &mut g),
        GradLoss::CrossEntropy => ce_grad(ctx, p, &mut g),
        GradLoss::ShapeConsistency => {
            dice_grad(ctx, p, &mut g);
            ce_grad(ctx, p, &mut g);
        }
        GradLoss::L1 => l1_grad(ctx, p, &mut g),
    }
    g
}

fn context<'a>(pred: &ProbMap, target: &'a LabelMap3D, weights: Option<&ClassWeights>) -> Result<Ctx<'a>> {
    check_pair(pred, target)?;
    let w = match weights {
        Some(w) if w.values().len() != pred.classes() => {
            return Err(LossError::WeightCount {
                expected: pred.classes(),
                got: w.values().len(),
            })
        }
        Some(w) => w.values().to_vec(),
        None => vec![1.0; pred.classes()],
    };
    Ok(Ctx {
        dims_n: pred.voxels(),
        classes: pred.classes(),
        t: target.labels(),
        w,
    })
}

/// Loss value as seen by the gradient routines (default smoothing/clamp;
/// unit weights when `weights` is `None`).
pub fn loss_value(loss: GradLoss, pred: &ProbMap, target: &LabelMap3D, weights: Option<&ClassWeights>) -> Result<f64> {
    let ctx = context(pred, target, weights)?;
    Ok(eval(loss, &ctx, pred.data()))
}

/// Gradient in the class-major layout of [`ProbMap`].
pub fn analytic_gradient(
    loss: GradLoss,
    pred: &ProbMap,
    target: &LabelMap3D,
    weights: Option<&ClassWeights>,
) -> Result<Vec<f64>> {
    let ctx = context(pred, target, weights)?;
    Ok(grad(loss, &ctx, pred.data()))
}

/// Worst-case relative error between the analytic gradient and central
/// differences with step `h`. Each component's error is
/// `|a - f| / max(|a|, |f|, 1e-8)`.
pub fn grad_check(
    loss: GradLoss,
    pred: &ProbMap,
    target: &LabelMap3D,
    weights: Option<&ClassWeights>,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(LossError::InvalidTensor(format!("step must be positive, got {h}")));
    }
    let min_prob = pred.min_prob();
    if !(min_prob > 10.0 * h) {
        return Err(LossError::BoundaryPoint {
            min_prob,
            required: 10.0 * h,
        });
    }
    let ctx = context(pred, target, weights)?;
    let analytic = grad(loss, &ctx, pred.data());
    let mut p = pred.data().to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let orig = p[k];
        let (hi, lo) = (orig + h, orig - h);
        p[k] = hi;
        let fp = eval(loss, &ctx, &p);
        p[k] = lo;
        let fm = eval(loss, &ctx, &p);
        p[k] = orig;
        // divide by the representable step, not 2h
        let fd = (fp - fm) / (hi - lo);
        let a = analytic[k];
        let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
