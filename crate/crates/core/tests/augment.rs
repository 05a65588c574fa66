mod support;

use lge_synthlab::augment::{apply, sample_plan, AugmentConfig, AugmentOp, AugmentPlan};
use lge_synthlab::{LabelMap3D, Volume3D};
use proptest::prelude::*;
use support::fixtures::uniform_volume;

fn box_mask(dims: [usize; 3]) -> LabelMap3D {
    LabelMap3D::from_grid(
        lge_synthlab::Grid::new(dims, [1.0; 3]).unwrap(),
        (0..dims.iter().product::<usize>())
            .map(|i| {
                let (x, y) = (i % dims[0], (i / dims[0]) % dims[1]);
                ((4..=12).contains(&x) && (10..=20).contains(&y)) as u32
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn quarter_turn_moves_the_box() {
    let dims = [33, 33, 9];
    let m = box_mask(dims);
    let v = m.to_volume();
    let plan = AugmentPlan {
        seed: 0,
        ops: vec![AugmentOp::Affine {
            rotation_deg: [0.0, 0.0, 90.0],
            scale: 1.0,
            translation_mm: [0.0; 3],
        }],
    };
    let (_, out) = apply(&plan, &v, Some(&m)).unwrap();
    let out = out.unwrap();
    // q = R p with R a +90 degree turn about z: (x, y) -> (-y, x) around the centre
    let c = 16i64;
    let mut mismatches = 0;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let (sx, sy) = (c + (y as i64 - c), c - (x as i64 - c));
                let want = ((4..=12).contains(&sx) && (10..=20).contains(&sy)) as u32;
                if out.get(x, y, z) != want {
                    mismatches += 1;
                }
            }
        }
    }
    assert_eq!(mismatches, 0);
    let before = m.counts()[1] as f64;
    let after = out.counts()[1] as f64;
    assert!((after - before).abs() / before <= 0.02);
}

#[test]
fn replay_is_bit_exact() {
    let v = uniform_volume([20, 18, 10], 3);
    let m = box_mask([20, 18, 10]);
    let mut cfg = AugmentConfig::default();
    cfg.affine.prob = 1.0;
    cfg.elastic.prob = 1.0;
    cfg.noise.prob = 1.0;
    let plan = sample_plan(11, &cfg).unwrap();
    let (v1, m1) = apply(&plan, &v, Some(&m)).unwrap();
    let replay = AugmentPlan::from_json(&plan.to_json()).unwrap();
    assert_eq!(replay, plan);
    let (v2, m2) = apply(&replay, &v, Some(&m)).unwrap();
    let bits = |v: &Volume3D| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&v1), bits(&v2));
    assert_eq!(m1, m2);
}

#[test]
fn disabled_config_samples_nothing() {
    assert!(sample_plan(5, &AugmentConfig::disabled()).unwrap().ops.is_empty());
    let mut cfg = AugmentConfig::disabled();
    cfg.flip.prob = [1.0, 0.0, 0.0];
    let plan = sample_plan(5, &cfg).unwrap();
    assert_eq!(plan.ops, vec![AugmentOp::Flip { axes: vec![0] }]);
}

fn everything_on() -> AugmentConfig {
    let mut cfg = AugmentConfig::default();
    cfg.flip.prob = [0.5; 3];
    cfg.affine.prob = 1.0;
    cfg.elastic.prob = 1.0;
    cfg.gamma.prob = 1.0;
    cfg.bias_field.prob = 1.0;
    cfg.blur.prob = 1.0;
    cfg.noise.prob = 1.0;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mask_never_perturbs_volume(seed in any::<u64>()) {
        let v = uniform_volume([12, 10, 8], seed);
        let m = box_mask([12, 10, 8]);
        let plan = sample_plan(seed, &everything_on()).unwrap();
        let (with, _) = apply(&plan, &v, Some(&m)).unwrap();
        let (without, _) = apply(&plan, &v, None).unwrap();
        prop_assert_eq!(with, without);
    }

    #[test]
    fn mask_labels_stay_in_input_set(seed in any::<u64>()) {
        let v = uniform_volume([12, 10, 8], seed);
        let m = box_mask([12, 10, 8]);
        let plan = sample_plan(seed, &everything_on()).unwrap();
        let (_, out) = apply(&plan, &v, Some(&m)).unwrap();
        // zero is the fill value and already in the input set
        for l in out.unwrap().label_set() {
            prop_assert!(m.label_set().contains(&l));
        }
    }

    #[test]
    fn flips_are_involutions(seed in any::<u64>(), axes in prop::collection::btree_set(0usize..3, 1..=3)) {
        let v = uniform_volume([7, 6, 5], seed);
        let plan = AugmentPlan { seed, ops: vec![AugmentOp::Flip { axes: axes.into_iter().collect() }] };
        let (once, _) = apply(&plan, &v, None).unwrap();
        let (twice, _) = apply(&plan, &once, None).unwrap();
        prop_assert_eq!(twice, v);
    }
}

#[test]
fn identity_parameters_leave_data_alone() {
    let v = uniform_volume([9, 8, 7], 2);
    let plan = AugmentPlan {
        seed: 0,
        ops: vec![
            AugmentOp::Gamma { gamma: 1.0 },
            AugmentOp::Affine {
                rotation_deg: [0.0; 3],
                scale: 1.0,
                translation_mm: [0.0; 3],
            },
            AugmentOp::Elastic {
                alpha: 0.0,
                sigma: 2.0,
                grid_spacing: 4,
                seed: 1,
            },
        ],
    };
    assert_eq!(apply(&plan, &v, None).unwrap().0, v);
}
