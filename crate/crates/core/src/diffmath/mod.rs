//! Diffusion numerics: cosine noise schedule, forward noising, the
//! denoising objective and classifier-free guidance blending.
//!
//! The denoising network itself is out of scope. Its predictions arrive as
//! [`LatentTensor`] files.

mod tensor;

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use thiserror::Error;

use crate::util::CompensatedSum;

pub use tensor::{load_tensor, save_tensor, LatentTensor, LTNS_MAGIC};

pub const BETA_MIN: f64 = 1e-8;
pub const BETA_MAX: f64 = 0.999;
pub const DEFAULT_COSINE_OFFSET: f64 = 0.008;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("step {t} outside 0..={steps}")]
    StepOutOfRange { t: usize, steps: usize },
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("data length {actual} does not match shape (expected {expected})")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },
    #[error("invalid schedule parameters: {0}")]
    InvalidSchedule(String),
    #[error("malformed tensor file at byte {offset}: {reason}")]
    MalformedTensor { offset: usize, reason: String },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = DiffError> = std::result::Result<T, E>;

/// A variance schedule over steps `1..=T`.
///
/// `beta[t - 1]` and `alpha[t - 1]` belong to step `t`. `alpha_bar` has
/// `T + 1` entries with `alpha_bar[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSchedule {
    steps: usize,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from per-step betas (clipped to
    /// `[BETA_MIN, BETA_MAX]`).
    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        if betas.is_empty() {
            return Err(DiffError::InvalidSchedule("need at least one step".into()));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(DiffError::InvalidSchedule("non-finite beta".into()));
        }
        let beta: Vec<f64> = betas.iter().map(|b| b.clamp(BETA_MIN, BETA_MAX)).collect();
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(beta.len() + 1);
        alpha_bar.push(1.0);
        for a in &alpha {
            let prev = *alpha_bar.last().unwrap();
            alpha_bar.push(prev * a);
        }
        Ok(Self {
            steps: beta.len(),
            beta,
            alpha,
            alpha_bar,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check_step(t, 1)?;
        Ok(self.beta[t - 1])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        self.check_step(t, 1)?;
        Ok(self.alpha[t - 1])
    }

    /// Cumulative product up to step `t`; `t = 0` gives 1.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.check_step(t, 0)?;
        Ok(self.alpha_bar[t])
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    fn check_step(&self, t: usize, lo: usize) -> Result<()> {
        if t < lo || t > self.steps {
            return Err(DiffError::StepOutOfRange {
                t,
                steps: self.steps,
            });
        }
        Ok(())
    }
}

/// Squared-cosine schedule with offset `s`.
///
/// Betas come from the ratio of consecutive `f(t) = cos²((t/T + s)/(1 + s) · π/2)`
/// values and are clipped; `alpha_bar` is then rebuilt as the running product
/// so it stays consistent with the clipped betas.
pub fn cosine_schedule(steps: usize, s: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(DiffError::InvalidSchedule("T must be at least 1".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(DiffError::InvalidSchedule(format!("offset must be positive, got {s}")));
    }
    let f = |t: usize| {
        let x = ((t as f64 / steps as f64 + s) / (1.0 + s)) * FRAC_PI_2;
        x.cos().powi(2)
    };
    let f0 = f(0);
    let raw: Vec<f64> = (0..=steps).map(|t| f(t) / f0).collect();
    let betas: Vec<f64> = (1..=steps).map(|t| 1.0 - raw[t] / raw[t - 1]).collect();
    NoiseSchedule::from_betas(&betas)
}

/// `z_t = sqrt(alpha_bar_t) z + sqrt(1 - alpha_bar_t) eps`.
///
/// Training draws `t` from `1..=T`; `t = 0` is accepted and returns `z`.
pub fn forward_noise(
    z: &LatentTensor,
    t: usize,
    sched: &NoiseSchedule,
    eps: &LatentTensor,
) -> Result<LatentTensor> {
    z.ensure_same_shape(eps)?;
    let ab = sched.alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    z.map2(eps, |zv, ev| a * zv + b * ev)
}

/// Mean squared error between true and predicted noise.
pub fn denoise_loss(eps_true: &LatentTensor, eps_pred: &LatentTensor) -> Result<f64> {
    eps_true.ensure_same_shape(eps_pred)?;
    let sum: CompensatedSum = eps_true
        .data()
        .iter()
        .zip(eps_pred.data())
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(sum.value() / eps_true.len() as f64)
}

/// `eps_uncond + w (eps_cond - eps_uncond)`.
///
/// Evaluated as `(1 - w) u + w c` so that `w = 0` and `w = 1` return the
/// respective branch bit-exactly; equal branches pass through unchanged.
pub fn cfg_blend(eps_uncond: &LatentTensor, eps_cond: &LatentTensor, w: f64) -> Result<LatentTensor> {
    eps_uncond.map2(eps_cond, |u, c| if u == c { c } else { (1.0 - w) * u + w * c })
}
