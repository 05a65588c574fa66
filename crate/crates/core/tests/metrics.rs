mod support;

use lge_synthlab::synthmetrics::{
    fid, mmd2, ms_ssim, psnr, FeatureMoments, FeatureSet, Kernel, MetricError, MsSsimConfig,
};
use lge_synthlab::Volume3D;
use rand::Rng;
use support::fixtures::{rng, uniform_volume};
use support::oracles::{dot, fid_jacobi, mmd2_brute, ms_ssim_direct};

fn moments(mu: Vec<f64>, s: Vec<Vec<f64>>) -> FeatureMoments {
    FeatureMoments::new(mu, s, 10).unwrap()
}

fn random_psd(d: usize, r: &mut impl Rng) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let mut s = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            s[i][j] = (0..d).map(|k| a[i][k] * a[j][k]).sum();
        }
    }
    s
}

#[test]
fn fid_closed_forms() {
    let s = vec![vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.1, 0.5]];
    let mu = vec![0.5, -1.0, 2.0];
    let same = fid(&moments(mu.clone(), s.clone()), &moments(mu.clone(), s.clone())).unwrap();
    assert!(same.abs() < 1e-8, "{same}");

    let mu2 = vec![1.5, 1.0, 2.5];
    let dm: f64 = mu.iter().zip(&mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    let shifted = fid(&moments(mu, s.clone()), &moments(mu2, s)).unwrap();
    assert!((shifted - dm).abs() < 1e-8, "{shifted} vs {dm}");

    let scalar = fid(&moments(vec![0.0], vec![vec![1.0]]), &moments(vec![0.0], vec![vec![4.0]])).unwrap();
    assert!((scalar - 1.0).abs() < 1e-10, "{scalar}");
}

#[test]
fn fid_random_psd_against_jacobi() {
    let mut r = rng(3);
    for d in 1..=16 {
        for _ in 0..3 {
            let (sr, sg) = (random_psd(d, &mut r), random_psd(d, &mut r));
            let mr: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            let mg: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            let got = fid(&moments(mr.clone(), sr.clone()), &moments(mg.clone(), sg.clone())).unwrap();
            let want = fid_jacobi(&mr, &sr, &mg, &sg);
            let rel = (got - want).abs() / want.abs().max(1e-12);
            assert!(rel < 1e-6, "d={d}: {got} vs {want}");
        }
    }
}

#[test]
fn mmd_matches_double_loop() {
    let mut r = rng(11);
    for _ in 0..30 {
        let (n, m, d) = (r.random_range(2..=16), r.random_range(2..=16), r.random_range(1..=6));
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let (fx, fy) = (FeatureSet::from_rows(&x).unwrap(), FeatureSet::from_rows(&y).unwrap());

        let got = mmd2(&fx, &fy, Kernel::Dot).unwrap();
        let want = mmd2_brute(&x, &y, dot);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        let gamma = 0.3;
        let rbf = |a: &[f64], b: &[f64]| (-gamma * a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp();
        let got = mmd2(&fx, &fy, Kernel::Rbf { gamma }).unwrap();
        let want = mmd2_brute(&x, &y, rbf);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn mmd_negative_fixture() {
    let f = FeatureSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let v = mmd2(&f, &f, Kernel::Dot).unwrap();
    assert!((v + 1.0).abs() < 1e-12, "{v}");
}

fn small_window() -> MsSsimConfig {
    MsSsimConfig {
        window_size: 7,
        ..MsSsimConfig::default()
    }
}

fn perturbed(v: &Volume3D, seed: u64, amp: f64) -> Volume3D {
    let mut r = rng(seed);
    let data = v.data().iter().map(|x| (x + amp * r.random_range(-1.0..1.0)).clamp(0.0, 1.0)).collect();
    Volume3D::new(v.dims(), v.spacing(), data).unwrap()
}

#[test]
fn ms_ssim_self_and_symmetry_at_32() {
    let cfg = small_window();
    for seed in 0..10 {
        let a = uniform_volume([32; 3], seed);
        let b = perturbed(&a, seed + 100, 0.2);
        let s = ms_ssim(&a, &a, &cfg).unwrap();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
        let ab = ms_ssim(&a, &b, &cfg).unwrap();
        let ba = ms_ssim(&b, &a, &cfg).unwrap();
        assert!((ab - ba).abs() < 1e-6, "{ab} vs {ba}");
    }
}

#[test]
fn ms_ssim_matches_direct_summation() {
    let cfg = small_window();
    for seed in 0..3 {
        let a = uniform_volume([32; 3], 50 + seed);
        let b = perturbed(&a, 60 + seed, 0.3);
        let got = ms_ssim(&a, &b, &cfg).unwrap();
        let want = ms_ssim_direct(a.data(), b.data(), a.dims(), &cfg.weights, 7, 1.5, 1.0);
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        assert!(got < 0.999);
    }
}

#[test]
fn ms_ssim_default_window_at_44() {
    let cfg = MsSsimConfig::default();
    let a = uniform_volume([44; 3], 9);
    let b = perturbed(&a, 10, 0.2);
    assert!((ms_ssim(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-6);
    let got = ms_ssim(&a, &b, &cfg).unwrap();
    let want = ms_ssim_direct(a.data(), b.data(), a.dims(), &cfg.weights, 11, 1.5, 1.0);
    assert!((got - want).abs() < 1e-5, "{got} vs {want}");
}

#[test]
fn ms_ssim_default_window_rejects_32() {
    let a = uniform_volume([32; 3], 1);
    assert!(matches!(
        ms_ssim(&a, &a, &MsSsimConfig::default()),
        Err(MetricError::VolumeTooSmall { .. })
    ));
}

#[test]
fn psnr_twenty_db() {
    // alternating +-0.1 around 0.5 gives MSE exactly 0.01 in exact arithmetic
    let a = Volume3D::filled([8, 8, 8], [1.0; 3], 0.5).unwrap();
    let b = Volume3D::from_fn([8, 8, 8], [1.0; 3], |x, _, _| if x % 2 == 0 { 0.6 } else { 0.4 }).unwrap();
    let p = psnr(&a, &b, 1.0).unwrap();
    assert!((p - 20.0).abs() < 1e-9, "{p}");
}

#[test]
fn psnr_decreases_with_perturbation() {
    let a = uniform_volume([16; 3], 4);
    let mut r = rng(5);
    let dir: Vec<f64> = (0..a.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut last = f64::INFINITY;
    for s in 1..=10 {
        let scale = 0.01 * s as f64;
        let data = a.data().iter().zip(&dir).map(|(x, d)| x + scale * d).collect();
        let b = Volume3D::new(a.dims(), a.spacing(), data).unwrap();
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!(p < last, "scale {scale}: {p} >= {last}");
        last = p;
    }
}
