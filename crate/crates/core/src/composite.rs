//! Composite semantic label maps: expert endocardium and wall masks fused
//! with intensity clusters.
//!
//! Final labels: 0 background, 1 endocardium, 2 wall, 3.. context clusters.
//! Cluster labels under either mask are zeroed; the surviving cluster ids
//! other than 0 and the background cluster are renumbered consecutively from
//! 3 in ascending id order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clusterlab::ClusterModel;
use crate::volcore::{Dims, LabelMap3D, MaskPair, Volume3D, VolumeError};

pub const LABEL_BACKGROUND: u32 = 0;
pub const LABEL_ENDO: u32 = 1;
pub const LABEL_WALL: u32 = 2;
pub const FIRST_CONTEXT_LABEL: u32 = 3;

#[derive(Debug, Error)]
pub enum CompositeError {
    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: Dims, right: Dims },
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Background cluster and whether it came from the smallest-centroid
/// fallback (no exact-zero voxel found).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundCluster {
    pub id: u32,
    pub fallback: bool,
}

/// Everything [`compose`] decided, plus the final map.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTrace {
    pub background: BackgroundCluster,
    /// Sorted unique cluster ids after zeroing masked voxels.
    pub surviving: Vec<u32>,
    /// Cluster id to final label (always >= 3).
    pub remap: BTreeMap<u32, u32>,
    pub final_map: LabelMap3D,
}

/// JSON form of a trace, without the map itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub b: u32,
    #[serde(rename = "U")]
    pub surviving: Vec<u32>,
    pub remap: BTreeMap<u32, u32>,
    pub fallback_flag: bool,
}

impl CompositeTrace {
    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            b: self.background.id,
            surviving: self.surviving.clone(),
            remap: self.remap.clone(),
            fallback_flag: self.background.fallback,
        }
    }
}

fn same_dims(a: Dims, b: Dims) -> Result<(), CompositeError> {
    if a != b {
        return Err(CompositeError::DimsMismatch { left: a, right: b });
    }
    Ok(())
}

/// Smallest cluster id that owns at least one voxel of intensity exactly 0.
/// Falls back to the cluster with the smallest centroid.
pub fn detect_background_cluster(
    cluster: &ClusterModel,
    v: &Volume3D,
) -> Result<BackgroundCluster, CompositeError> {
    same_dims(cluster.assignments.dims(), v.dims())?;
    let zero_owner = v
        .data()
        .iter()
        .zip(cluster.assignments.labels())
        .filter(|(&x, _)| x == 0.0)
        .map(|(_, &l)| l)
        .min();
    Ok(match zero_owner {
        Some(id) => BackgroundCluster { id, fallback: false },
        None => {
            let id = cluster
                .centroids
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i as u32)
                .unwrap_or(0);
            BackgroundCluster { id, fallback: true }
        }
    })
}

/// Builds the composite label map.
pub fn compose(
    v: &Volume3D,
    masks: &MaskPair,
    cluster: &ClusterModel,
) -> Result<CompositeTrace, CompositeError> {
    same_dims(v.dims(), masks.dims())?;
    same_dims(v.dims(), cluster.assignments.dims())?;
    let background = detect_background_cluster(cluster, v)?;
    let b = background.id;

    let zeroed: Vec<u32> = cluster
        .assignments
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| if masks.is_masked(i) { 0 } else { l })
        .collect();

    let mut present = vec![false; zeroed.iter().copied().max().unwrap_or(0) as usize + 1];
    zeroed.iter().for_each(|&l| present[l as usize] = true);
    let surviving: Vec<u32> = (0..present.len() as u32)
        .filter(|&l| present[l as usize])
        .collect();

    let remap: BTreeMap<u32, u32> = surviving
        .iter()
        .copied()
        .filter(|&k| k != b && k != 0)
        .zip(FIRST_CONTEXT_LABEL..)
        .collect();
    let mut lut = vec![LABEL_BACKGROUND; present.len()];
    for (&k, &r) in &remap {
        lut[k as usize] = r;
    }

    let labels: Vec<u32> = zeroed
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if masks.endo()[i] == 1 {
                LABEL_ENDO
            } else if masks.wall()[i] == 1 {
                LABEL_WALL
            } else {
                lut[l as usize]
            }
        })
        .collect();
    let final_map = LabelMap3D::from_grid(v.grid(), labels)?;
    Ok(CompositeTrace {
        background,
        surviving,
        remap,
        final_map,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    /// First offending voxel, when the check is spatial.
    pub counterexample: Option<Dims>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<InvariantCheck>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_LABEL_SEMANTICS: &str = "label_semantics";
pub const CHECK_MASK_LABELS: &str = "mask_labels";
pub const CHECK_BACKGROUND_EXCLUDED: &str = "background_excluded";

/// Checks a trace against the composite invariants. Never fails; problems
/// are reported per invariant with the first offending voxel.
pub fn validate_composite(trace: &CompositeTrace, masks: &MaskPair) -> ValidationReport {
    let map = &trace.final_map;
    let grid = map.grid();
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    if map.dims() != masks.dims() {
        let detail = format!("map dims {:?} vs mask dims {:?}", map.dims(), masks.dims());
        for name in [CHECK_LABEL_SEMANTICS, CHECK_MASK_LABELS, CHECK_BACKGROUND_EXCLUDED] {
            checks.push(InvariantCheck {
                name: name.into(),
                passed: false,
                counterexample: None,
                detail: Some(detail.clone()),
            });
        }
        return ValidationReport { checks, warnings };
    }

    // 1: every label is background, a mask label, or a remapped cluster
    let context: Vec<u32> = trace.remap.values().copied().collect();
    let bad = map
        .labels()
        .iter()
        .position(|&l| l > LABEL_WALL && !context.contains(&l));
    checks.push(InvariantCheck {
        name: CHECK_LABEL_SEMANTICS.into(),
        passed: bad.is_none(),
        counterexample: bad.map(|i| grid.coords(i)),
        detail: bad.map(|i| format!("label {} is not a remapped cluster", map.labels()[i])),
    });

    // 2: endo voxels carry 1, wall voxels carry 2
    let bad = (0..map.len()).find(|&i| {
        (masks.endo()[i] == 1 && map.labels()[i] != LABEL_ENDO)
            || (masks.wall()[i] == 1 && map.labels()[i] != LABEL_WALL)
    });
    checks.push(InvariantCheck {
        name: CHECK_MASK_LABELS.into(),
        passed: bad.is_none(),
        counterexample: bad.map(|i| grid.coords(i)),
        detail: bad.map(|i| {
            format!(
                "voxel labelled {} under endo={} wall={}",
                map.labels()[i],
                masks.endo()[i],
                masks.wall()[i]
            )
        }),
    });

    // 3: the background cluster is never remapped, and remapped labels
    // start at 3
    let b = trace.background.id;
    let b_remapped = trace.remap.contains_key(&b);
    let low = trace.remap.values().find(|&&r| r < FIRST_CONTEXT_LABEL);
    checks.push(InvariantCheck {
        name: CHECK_BACKGROUND_EXCLUDED.into(),
        passed: !b_remapped && low.is_none(),
        counterexample: None,
        detail: if b_remapped {
            Some(format!("background cluster {b} has a context label"))
        } else {
            low.map(|r| format!("context label {r} collides with a reserved label"))
        },
    });

    let absent = map.absent_labels();
    let gaps: Vec<u32> = absent.into_iter().filter(|&l| l >= FIRST_CONTEXT_LABEL).collect();
    if !gaps.is_empty() {
        warnings.push(format!("context labels are not contiguous: missing {gaps:?}"));
    }
    ValidationReport { checks, warnings }
}
