//! Segmentation losses on probability maps: soft Dice, weighted
//! cross-entropy, their sum (the shape-consistency loss), L1, and
//! inverse-frequency class weights.
//!
//! Inputs are post-softmax probabilities, not logits.

mod grad;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::diffmath::{load_tensor, save_tensor, DiffError, LatentTensor};
use crate::util::par_sum;
use crate::volcore::{Dims, LabelMap3D, Volume3D};

pub use grad::{analytic_gradient, grad_check, loss_value, GradLoss};

pub const DEFAULT_DICE_SMOOTH: f64 = 1e-5;
pub const DEFAULT_CE_CLAMP: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("label {label} at voxel {voxel:?} is out of range for {classes} classes")]
    LabelOutOfRange {
        label: u32,
        classes: usize,
        voxel: Dims,
    },
    #[error("class {class} has no voxels")]
    AbsentClass { class: usize },
    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: Dims, right: Dims },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("probabilities at voxel {voxel:?} are invalid (sum {sum})")]
    InvalidProbabilities { voxel: Dims, sum: f64 },
    #[error("invalid class weights: {0}")]
    InvalidWeights(String),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("point too close to the simplex boundary: min probability {min_prob} must exceed {required}")]
    BoundaryPoint { min_prob: f64, required: f64 },
    #[error("invalid probability map tensor: {0}")]
    InvalidTensor(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Tensor(#[from] DiffError),
}

pub type Result<T, E = LossError> = std::result::Result<T, E>;

/// Per-voxel class probabilities.
///
/// Stored class-major: element `(c, x, y, z)` lives at `c * N + x + nx * (y + ny * z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    dims: Dims,
    classes: usize,
    data: Vec<f64>,
}

impl ProbMap {
    pub fn new(dims: Dims, classes: usize, data: Vec<f64>) -> Result<Self> {
        let pm = Self::unchecked(dims, classes, data)?;
        let n = pm.voxels();
        for i in 0..n {
            let mut sum = 0.0;
            let mut ok = true;
            for c in 0..classes {
                let p = pm.data[c * n + i];
                ok &= p.is_finite() && p >= 0.0;
                sum += p;
            }
            if !ok || (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(LossError::InvalidProbabilities {
                    voxel: coords(dims, i),
                    sum,
                });
            }
        }
        Ok(pm)
    }

    /// Shape checks only; used for perturbed points off the simplex.
    pub(crate) fn unchecked(dims: Dims, classes: usize, data: Vec<f64>) -> Result<Self> {
        if classes < 2 {
            return Err(LossError::TooFewClasses(classes));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(LossError::InvalidTensor(format!("empty dims {dims:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != classes * n {
            return Err(LossError::InvalidTensor(format!(
                "expected {} values, got {}",
                classes * n,
                data.len()
            )));
        }
        Ok(Self { dims, classes, data })
    }

    pub fn one_hot(target: &LabelMap3D, classes: usize) -> Result<Self> {
        check_labels(target, classes)?;
        let n = target.len();
        let mut data = vec![0.0; classes * n];
        for (i, &l) in target.labels().iter().enumerate() {
            data[l as usize * n + i] = 1.0;
        }
        Self::unchecked(target.dims(), classes, data)
    }

    pub fn uniform(dims: Dims, classes: usize) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        Self::unchecked(dims, classes, vec![1.0 / classes as f64; classes * n])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn prob(&self, class: usize, voxel: usize) -> f64 {
        self.data[class * self.voxels() + voxel]
    }

    pub fn class_slice(&self, class: usize) -> &[f64] {
        let n = self.voxels();
        &self.data[class * n..(class + 1) * n]
    }

    pub fn min_prob(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_tensor(&self) -> Result<LatentTensor> {
        let [nx, ny, nz] = self.dims;
        Ok(LatentTensor::new(vec![self.classes, nx, ny, nz], self.data.clone())?)
    }

    /// Reads a rank-4 tensor with shape `(C, H, W, D)`.
    pub fn from_tensor(t: &LatentTensor) -> Result<Self> {
        let s = t.shape();
        if s.len() != 4 {
            return Err(LossError::InvalidTensor(format!(
                "expected rank 4 (C,H,W,D), got shape {s:?}"
            )));
        }
        Self::new([s[1], s[2], s[3]], s[0], t.data().to_vec())
    }
}

pub fn load_probmap(path: &Path) -> Result<ProbMap> {
    ProbMap::from_tensor(&load_tensor(path)?)
}

pub fn save_probmap(p: &ProbMap, path: &Path) -> Result<()> {
    Ok(save_tensor(&p.to_tensor()?, path)?)
}

fn coords(dims: Dims, i: usize) -> Dims {
    [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])]
}

fn check_labels(target: &LabelMap3D, classes: usize) -> Result<()> {
    if let Some(i) = target.labels().iter().position(|&l| l as usize >= classes) {
        return Err(LossError::LabelOutOfRange {
            label: target.labels()[i],
            classes,
            voxel: target.grid().coords(i),
        });
    }
    Ok(())
}

pub(crate) fn check_pair(pred: &ProbMap, target: &LabelMap3D) -> Result<()> {
    if pred.dims != target.dims() {
        return Err(LossError::DimsMismatch {
            left: pred.dims,
            right: target.dims(),
        });
    }
    check_labels(target, pred.classes)
}

/// Positive per-class weights, normalized so they sum to the class count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.len() < 2 {
            return Err(LossError::TooFewClasses(raw.len()));
        }
        if raw.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(LossError::InvalidWeights(format!("{raw:?}")));
        }
        let scale = raw.len() as f64 / raw.iter().sum::<f64>();
        Ok(Self(raw.into_iter().map(|w| w * scale).collect()))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![1.0; classes])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Inverse-frequency weights `w_c ∝ 1 / count_c`.
pub fn class_weights(target: &LabelMap3D, classes: usize) -> Result<ClassWeights> {
    check_labels(target, classes)?;
    let mut counts = vec![0usize; classes];
    for &l in target.labels() {
        counts[l as usize] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(LossError::AbsentClass { class });
    }
    ClassWeights::new(counts.iter().map(|&c| 1.0 / c as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiceScores {
    pub per_class: Vec<f64>,
    /// Mean over foreground classes (class 0 excluded).
    pub mean: f64,
}

fn dice_terms(pred: &ProbMap, target: &LabelMap3D, class: usize) -> (f64, f64, f64) {
    let p = pred.class_slice(class);
    let t = target.labels();
    let c = class as u32;
    let inter = par_sum(p.len(), |i| if t[i] == c { p[i] } else { 0.0 });
    let psum = par_sum(p.len(), |i| p[i]);
    let tsum = t.iter().filter(|&&l| l == c).count() as f64;
    (inter, psum, tsum)
}

/// Soft Dice `(2 Σ p t + ε) / (Σ p + Σ t + ε)` per class.
pub fn soft_dice(pred: &ProbMap, target: &LabelMap3D, smooth: f64) -> Result<DiceScores> {
    check_pair(pred, target)?;
    let per_class: Vec<f64> = (0..pred.classes)
        .map(|c| {
            let (i, p, t) = dice_terms(pred, target, c);
            let den = p + t + smooth;
            if den == 0.0 {
                // empty class with no smoothing: treat as perfect agreement
                1.0
            } else {
                (2.0 * i + smooth) / den
            }
        })
        .collect();
    let mean = per_class[1..].iter().sum::<f64>() / (pred.classes - 1) as f64;
    Ok(DiceScores { per_class, mean })
}

/// Weighted cross-entropy with weights used as given.
pub fn cross_entropy_with(pred: &ProbMap, target: &LabelMap3D, weights: &[f64], clamp: f64) -> Result<f64> {
    check_pair(pred, target)?;
    if weights.len() != pred.classes {
        return Err(LossError::WeightCount {
            expected: pred.classes,
            got: weights.len(),
        });
    }
    let n = pred.voxels();
    let t = target.labels();
    Ok(par_sum(n, |i| {
        let c = t[i] as usize;
        -weights[c] * pred.data[c * n + i].max(clamp).ln()
    }) / n as f64)
}

/// Mean over voxels of `-w_t log(max(p_t, clamp))`.
pub fn cross_entropy(pred: &ProbMap, target: &LabelMap3D, w: &ClassWeights, clamp: f64) -> Result<f64> {
    cross_entropy_with(pred, target, w.values(), clamp)
}

/// `(1 - mean Dice) + CE` with the default smoothing and clamp.
pub fn shape_consistency_loss(pred: &ProbMap, target: &LabelMap3D, w: &ClassWeights) -> Result<f64> {
    let dice = soft_dice(pred, target, DEFAULT_DICE_SMOOTH)?;
    let ce = cross_entropy(pred, target, w, DEFAULT_CE_CLAMP)?;
    Ok((1.0 - dice.mean) + ce)
}

/// Mean shape-consistency loss over a batch.
pub fn shape_consistency_batch(preds: &[ProbMap], targets: &[LabelMap3D], w: &ClassWeights) -> Result<f64> {
    if preds.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if preds.len() != targets.len() {
        return Err(LossError::InvalidTensor(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        total += shape_consistency_loss(p, t, w)?;
    }
    Ok(total / preds.len() as f64)
}

/// Mean absolute voxel difference.
pub fn l1_loss(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(LossError::DimsMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    let (x, y) = (a.data(), b.data());
    Ok(par_sum(x.len(), |i| (x[i] - y[i]).abs()) / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[u32]) -> LabelMap3D {
        LabelMap3D::new([v.len(), 1, 1], [1.0; 3], v.to_vec()).unwrap()
    }

    fn two_class(p1: &[f64]) -> ProbMap {
        let mut data: Vec<f64> = p1.iter().map(|p| 1.0 - p).collect();
        data.extend_from_slice(p1);
        ProbMap::new([p1.len(), 1, 1], 2, data).unwrap()
    }

    #[test]
    fn dice_hand_case() {
        let d = soft_dice(&two_class(&[1.0, 0.5, 0.0, 0.0]), &labels(&[1, 1, 0, 0]), 0.0).unwrap();
        assert!((d.per_class[1] - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(d.mean, d.per_class[1]);
    }

    #[test]
    fn dice_perfect_and_disjoint() {
        let t = labels(&[0, 2, 1, 1, 2]);
        let d = soft_dice(&ProbMap::one_hot(&t, 3).unwrap(), &t, DEFAULT_DICE_SMOOTH).unwrap();
        assert!(d.per_class.iter().all(|&v| v == 1.0));
        let wrong = soft_dice(&two_class(&[0.0, 0.0, 1.0]), &labels(&[1, 1, 0]), 1e-9).unwrap();
        assert!(wrong.per_class[1] < 1e-9);
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let t = labels(&[0, 1, 1, 0]);
        let w = ClassWeights::uniform(2).unwrap();
        let u = ProbMap::uniform(t.dims(), 2).unwrap();
        assert!((cross_entropy(&u, &t, &w, DEFAULT_CE_CLAMP).unwrap() - 2f64.ln()).abs() < 1e-15);
        let perfect = ProbMap::one_hot(&t, 2).unwrap();
        assert_eq!(cross_entropy(&perfect, &t, &w, DEFAULT_CE_CLAMP).unwrap(), 0.0);
        let flipped = ProbMap::one_hot(&labels(&[1, 0, 0, 1]), 2).unwrap();
        let ce = cross_entropy(&flipped, &t, &w, DEFAULT_CE_CLAMP).unwrap();
        assert!((ce - 27.631021115928547).abs() < 1e-9, "{ce}");
    }

    #[test]
    fn weights_from_counts() {
        let mut v = vec![0u32; 90];
        v.extend(std::iter::repeat(1).take(10));
        let w = class_weights(&labels(&v), 2).unwrap();
        assert!((w.values()[0] - 0.2).abs() < 1e-12 && (w.values()[1] - 1.8).abs() < 1e-12);
        assert_eq!(class_weights(&labels(&[0, 1]), 2).unwrap().values(), &[1.0, 1.0]);
        assert!(matches!(
            class_weights(&labels(&[0, 0, 2]), 3),
            Err(LossError::AbsentClass { class: 1 })
        ));
        assert!(matches!(
            class_weights(&labels(&[0, 3]), 2),
            Err(LossError::LabelOutOfRange { label: 3, .. })
        ));
    }

    #[test]
    fn l1() {
        let a = Volume3D::new([3, 1, 1], [1.0; 3], vec![0.0, 0.5, 1.0]).unwrap();
        let b = Volume3D::new([3, 1, 1], [1.0; 3], vec![0.3, 0.8, 1.3]).unwrap();
        assert!((l1_loss(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn probmap_validation_and_tensor_round_trip() {
        assert!(ProbMap::new([2, 1, 1], 2, vec![0.5, 0.2, 0.5, 0.7]).is_err());
        assert!(ProbMap::new([1, 1, 1], 1, vec![1.0]).is_err());
        let p = two_class(&[0.25, 0.5, 0.75]);
        let t = p.to_tensor().unwrap();
        assert_eq!(t.shape(), &[2, 3, 1, 1]);
        assert_eq!(ProbMap::from_tensor(&t).unwrap(), p);
    }

    #[test]
    fn batch_mean() {
        let t = labels(&[0, 1]);
        let p = two_class(&[0.3, 0.6]);
        let w = ClassWeights::uniform(2).unwrap();
        let one = shape_consistency_loss(&p, &t, &w).unwrap();
        let batch = shape_consistency_batch(&[p.clone(), p], &[t.clone(), t], &w).unwrap();
        assert!((one - batch).abs() < 1e-15);
        assert!(matches!(shape_consistency_batch(&[], &[], &w), Err(LossError::EmptyBatch)));
    }
}
