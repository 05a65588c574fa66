//! Seeded offline augmentation of volume/mask pairs.
//!
//! A plan is sampled once from a config and then replayed. Spatial ops
//! (flip, affine, elastic) act on the volume and the mask alike, trilinear
//! for the volume and nearest for the mask. Intensity ops (gamma, bias
//! field, blur, noise) touch the volume only. Space pulled in from outside
//! the grid is filled with 0.

mod ops;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volcore::{Dims, LabelMap3D, Volume3D, VolumeError};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid range for {field}: [{min}, {max}]")]
    InvalidRange { field: String, min: f64, max: f64 },
    #[error("invalid probability for {field}: {value}")]
    InvalidProbability { field: String, value: f64 },
    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: Dims, right: Dims },
    #[error("gamma needs intensities in [0, 1]; voxel {voxel:?} has {value}")]
    UnnormalizedInput { voxel: Dims, value: f64 },
    #[error("invalid augmentation config: {0}")]
    Config(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T, E = AugmentError> = std::result::Result<T, E>;

/// Closed interval `[min, max]`, written as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check(&self, field: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(AugmentError::InvalidRange {
                field: field.to_string(),
                min: self.min,
                max: self.max,
            });
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

impl From<[f64; 2]> for Range {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.min, r.max]
    }
}

fn check_prob(field: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AugmentError::InvalidProbability {
            field: field.to_string(),
            value: p,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlipConfig {
    /// Flip probability per axis (x, y, z).
    pub prob: [f64; 3],
}

impl Default for FlipConfig {
    fn default() -> Self {
        Self { prob: [0.5, 0.5, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineConfig {
    pub prob: f64,
    /// Rotation in degrees, sampled independently about x, y and z.
    pub rotation_deg: [Range; 3],
    /// Isotropic scale factor.
    pub scale: Range,
    /// Translation in mm, sampled independently per axis.
    pub translation_mm: Range,
}

impl Default for AffineConfig {
    fn default() -> Self {
        Self {
            prob: 0.5,
            rotation_deg: [Range::new(-5.0, 5.0), Range::new(-5.0, 5.0), Range::new(-15.0, 15.0)],
            scale: Range::new(0.9, 1.1),
            translation_mm: Range::new(-5.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticConfig {
    pub prob: f64,
    /// Displacement scale in voxels.
    pub alpha: Range,
    /// Smoothing of the control-point field, in control-grid units.
    pub sigma: Range,
    /// Control-point spacing in voxels.
    pub grid_spacing: usize,
}

impl Default for ElasticConfig {
    fn default() -> Self {
        Self {
            prob: 0.3,
            alpha: Range::new(0.0, 3.0),
            sigma: Range::new(1.0, 2.0),
            grid_spacing: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarOpConfig {
    pub prob: f64,
    pub range: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasFieldConfig {
    pub prob: f64,
    pub order: u32,
    /// Bound on the absolute value of each polynomial coefficient.
    pub amplitude: Range,
}

impl Default for BiasFieldConfig {
    fn default() -> Self {
        Self {
            prob: 0.3,
            order: 3,
            amplitude: Range::new(0.0, 0.3),
        }
    }
}

impl Default for ScalarOpConfig {
    fn default() -> Self {
        Self {
            prob: 0.0,
            range: Range::new(0.0, 0.0),
        }
    }
}

/// Per-op probabilities and parameter ranges. Defaults are a reasonable
/// starting point, not a reproduction of any particular training setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip: FlipConfig,
    pub affine: AffineConfig,
    pub elastic: ElasticConfig,
    pub gamma: ScalarOpConfig,
    pub bias_field: BiasFieldConfig,
    pub blur: ScalarOpConfig,
    pub noise: ScalarOpConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip: FlipConfig::default(),
            affine: AffineConfig::default(),
            elastic: ElasticConfig::default(),
            gamma: ScalarOpConfig {
                prob: 0.3,
                range: Range::new(0.7, 1.5),
            },
            bias_field: BiasFieldConfig::default(),
            blur: ScalarOpConfig {
                prob: 0.2,
                range: Range::new(0.5, 1.0),
            },
            noise: ScalarOpConfig {
                prob: 0.3,
                range: Range::new(0.0, 0.05),
            },
        }
    }
}

impl AugmentConfig {
    /// Every probability set to zero.
    pub fn disabled() -> Self {
        let mut c = Self::default();
        c.flip.prob = [0.0; 3];
        c.affine.prob = 0.0;
        c.elastic.prob = 0.0;
        c.gamma.prob = 0.0;
        c.bias_field.prob = 0.0;
        c.blur.prob = 0.0;
        c.noise.prob = 0.0;
        c
    }

    pub fn validate(&self) -> Result<()> {
        for (a, p) in self.flip.prob.iter().enumerate() {
            check_prob(&format!("flip.prob[{a}]"), *p)?;
        }
        check_prob("affine.prob", self.affine.prob)?;
        for (a, r) in self.affine.rotation_deg.iter().enumerate() {
            r.check(&format!("affine.rotation_deg[{a}]"))?;
        }
        self.affine.scale.check("affine.scale")?;
        if self.affine.scale.min <= 0.0 {
            return Err(AugmentError::InvalidRange {
                field: "affine.scale".into(),
                min: self.affine.scale.min,
                max: self.affine.scale.max,
            });
        }
        self.affine.translation_mm.check("affine.translation_mm")?;
        check_prob("elastic.prob", self.elastic.prob)?;
        self.elastic.alpha.check("elastic.alpha")?;
        self.elastic.sigma.check("elastic.sigma")?;
        if self.elastic.grid_spacing == 0 {
            return Err(AugmentError::Config("elastic.grid_spacing must be positive".into()));
        }
        for (name, op, lo) in [
            ("gamma", &self.gamma, f64::MIN_POSITIVE),
            ("blur", &self.blur, 0.0),
            ("noise", &self.noise, 0.0),
        ] {
            check_prob(&format!("{name}.prob"), op.prob)?;
            op.range.check(&format!("{name}.range"))?;
            if op.range.min < lo {
                return Err(AugmentError::InvalidRange {
                    field: format!("{name}.range"),
                    min: op.range.min,
                    max: op.range.max,
                });
            }
        }
        check_prob("bias_field.prob", self.bias_field.prob)?;
        self.bias_field.amplitude.check("bias_field.amplitude")?;
        if self.bias_field.amplitude.min < 0.0 {
            return Err(AugmentError::InvalidRange {
                field: "bias_field.amplitude".into(),
                min: self.bias_field.amplitude.min,
                max: self.bias_field.amplitude.max,
            });
        }
        if self.bias_field.order > 6 {
            return Err(AugmentError::Config("bias_field.order must be at most 6".into()));
        }
        Ok(())
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| AugmentError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| AugmentError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AugmentError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// One recorded operation. Random fields carry their own seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentOp {
    Flip {
        axes: Vec<usize>,
    },
    Affine {
        rotation_deg: [f64; 3],
        scale: f64,
        translation_mm: [f64; 3],
    },
    Elastic {
        alpha: f64,
        sigma: f64,
        grid_spacing: usize,
        seed: u64,
    },
    Gamma {
        gamma: f64,
    },
    BiasField {
        order: u32,
        amplitude: f64,
        /// One coefficient per monomial `x^i y^j z^k`, `1 <= i+j+k <= order`,
        /// in [`ops::monomials`] order.
        coefficients: Vec<f64>,
    },
    Blur {
        sigma: f64,
    },
    Noise {
        sigma: f64,
        seed: u64,
    },
}

impl AugmentOp {
    pub fn is_spatial(&self) -> bool {
        matches!(self, Self::Flip { .. } | Self::Affine { .. } | Self::Elastic { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentPlan {
    pub seed: u64,
    pub ops: Vec<AugmentOp>,
}

impl AugmentPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AugmentError::Config(e.to_string()))
    }
}

/// Seed for the `index`-th volume of a batch.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

/// Draws a plan. Op order is fixed: spatial ops first, then gamma, bias
/// field, blur and noise.
pub fn sample_plan(seed: u64, config: &AugmentConfig) -> Result<AugmentPlan> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::new();
    let hit = |rng: &mut ChaCha8Rng, p: f64| rng.random::<f64>() < p;

    let axes: Vec<usize> = (0..3).filter(|&a| hit(&mut rng, config.flip.prob[a])).collect();
    if !axes.is_empty() {
        ops.push(AugmentOp::Flip { axes });
    }
    let c = &config.affine;
    if hit(&mut rng, c.prob) {
        let rotation_deg = [0, 1, 2].map(|a| c.rotation_deg[a].sample(&mut rng));
        let scale = c.scale.sample(&mut rng);
        let translation_mm = [0, 1, 2].map(|_| c.translation_mm.sample(&mut rng));
        ops.push(AugmentOp::Affine {
            rotation_deg,
            scale,
            translation_mm,
        });
    }
    let c = &config.elastic;
    if hit(&mut rng, c.prob) {
        ops.push(AugmentOp::Elastic {
            alpha: c.alpha.sample(&mut rng),
            sigma: c.sigma.sample(&mut rng),
            grid_spacing: c.grid_spacing,
            seed: rng.random(),
        });
    }
    if hit(&mut rng, config.gamma.prob) {
        ops.push(AugmentOp::Gamma {
            gamma: config.gamma.range.sample(&mut rng),
        });
    }
    let c = &config.bias_field;
    if hit(&mut rng, c.prob) {
        let amplitude = c.amplitude.sample(&mut rng);
        let coefficients = (0..ops::monomials(c.order).len())
            .map(|_| {
                if amplitude == 0.0 {
                    0.0
                } else {
                    rng.random_range(-amplitude..=amplitude)
                }
            })
            .collect();
        ops.push(AugmentOp::BiasField {
            order: c.order,
            amplitude,
            coefficients,
        });
    }
    if hit(&mut rng, config.blur.prob) {
        ops.push(AugmentOp::Blur {
            sigma: config.blur.range.sample(&mut rng),
        });
    }
    if hit(&mut rng, config.noise.prob) {
        ops.push(AugmentOp::Noise {
            sigma: config.noise.range.sample(&mut rng),
            seed: rng.random(),
        });
    }
    Ok(AugmentPlan { seed, ops })
}

/// Replays a plan on a volume and optional mask.
pub fn apply(
    plan: &AugmentPlan,
    v: &Volume3D,
    m: Option<&LabelMap3D>,
) -> Result<(Volume3D, Option<LabelMap3D>)> {
    if let Some(m) = m {
        if m.dims() != v.dims() {
            return Err(AugmentError::DimsMismatch {
                left: v.dims(),
                right: m.dims(),
            });
        }
    }
    let mut vol = v.clone();
    let mut mask = m.cloned();
    for op in &plan.ops {
        vol = ops::apply_volume(op, &vol)?;
        if op.is_spatial() {
            if let Some(mk) = mask.as_ref() {
                mask = Some(ops::apply_mask(op, mk)?);
            }
        }
    }
    Ok((vol, mask))
}
