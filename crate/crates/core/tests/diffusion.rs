mod support;

use lge_synthlab::diffmath::{
    cfg_blend, cosine_schedule, denoise_loss, forward_noise, LatentTensor, DEFAULT_COSINE_OFFSET,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use support::fixtures::rng;

const T: usize = 1000;

#[test]
fn cosine_schedule_is_consistent() {
    let s = cosine_schedule(T, DEFAULT_COSINE_OFFSET).unwrap();
    let ab = s.alpha_bars();
    assert_eq!(ab.len(), T + 1);
    assert!(ab.windows(2).all(|w| w[1] < w[0]));
    let mut prod = 1.0;
    for t in 1..=T {
        let beta = s.beta(t).unwrap();
        assert!(beta > 0.0 && beta < 1.0);
        assert_eq!(s.alpha(t).unwrap(), 1.0 - beta);
        prod *= 1.0 - beta;
        assert!((prod - ab[t]).abs() < 1e-12, "t={t}");
    }
    // closed form wherever the beta clip is inactive
    let f = |t: usize| {
        let x = (t as f64 / T as f64 + DEFAULT_COSINE_OFFSET) / (1.0 + DEFAULT_COSINE_OFFSET);
        (x * std::f64::consts::FRAC_PI_2).cos().powi(2)
    };
    for t in 0..T {
        if t > 0 && s.beta(t).unwrap() >= 0.999 {
            continue;
        }
        assert!((ab[t] - f(t) / f(0)).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn forward_noise_variance() {
    let s = cosine_schedule(T, DEFAULT_COSINE_OFFSET).unwrap();
    let n = 10_000;
    let mut r = rng(42);
    // z ~ N(0, 4) so the signal term is visible
    let z: Vec<f64> = (0..n).map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut r)).collect();
    let var_z = {
        let m = z.iter().sum::<f64>() / n as f64;
        z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    };
    let z = LatentTensor::new(vec![n], z).unwrap();
    for t in [100, 500, 900] {
        let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let eps = LatentTensor::new(vec![n], eps).unwrap();
        let zt = forward_noise(&z, t, &s, &eps).unwrap();
        let d = zt.data();
        let m = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        let ab = s.alpha_bar(t).unwrap();
        let want = ab * var_z + (1.0 - ab);
        assert!((var - want).abs() / want < 0.05, "t={t}: {var} vs {want}");
    }
}

#[test]
fn forward_noise_is_affine() {
    let s = cosine_schedule(50, DEFAULT_COSINE_OFFSET).unwrap();
    let mut r = rng(8);
    let mut t = || LatentTensor::new(vec![2, 3, 4], (0..24).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    let (z1, z2, e1, e2) = (t(), t(), t(), t());
    let (a, b) = (0.7, -1.3);
    let mix = |p: &LatentTensor, q: &LatentTensor| {
        LatentTensor::new(p.shape().to_vec(), p.data().iter().zip(q.data()).map(|(x, y)| a * x + b * y).collect()).unwrap()
    };
    for step in [1, 25, 50] {
        let lhs = forward_noise(&mix(&z1, &z2), step, &s, &mix(&e1, &e2)).unwrap();
        let r1 = forward_noise(&z1, step, &s, &e1).unwrap();
        let r2 = forward_noise(&z2, step, &s, &e2).unwrap();
        let rhs = mix(&r1, &r2);
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn denoise_loss_matches_scalar_loop() {
    let mut r = rng(2);
    let a: Vec<f64> = (0..300).map(|_| r.random_range(-3.0..3.0)).collect();
    let b: Vec<f64> = (0..300).map(|_| r.random_range(-3.0..3.0)).collect();
    let mut want = 0.0;
    for i in 0..300 {
        want += (a[i] - b[i]) * (a[i] - b[i]);
    }
    want /= 300.0;
    let got = denoise_loss(&LatentTensor::new(vec![300], a).unwrap(), &LatentTensor::new(vec![300], b).unwrap()).unwrap();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn guidance_endpoints_and_weight() {
    let u = LatentTensor::new(vec![3], vec![0.1, -0.4, 2.0]).unwrap();
    let c = LatentTensor::new(vec![3], vec![0.3, -0.4, 1.0]).unwrap();
    assert_eq!(cfg_blend(&u, &c, 0.0).unwrap(), u);
    assert_eq!(cfg_blend(&u, &c, 1.0).unwrap(), c);
    let g = cfg_blend(&u, &c, 1.5).unwrap();
    let want = [0.1 + 1.5 * 0.2, -0.4, 2.0 - 1.5];
    for (x, y) in g.data().iter().zip(want) {
        assert!((x - y).abs() < 1e-12);
    }
}
