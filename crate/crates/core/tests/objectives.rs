mod common;

use std::sync::Arc;

use common::*;
use devopt_core::objectives::{huber_tv, least_squares, soft_threshold_scalar, sum_smooth, SmoothFn};
use devopt_core::tensor::randn;
use devopt_core::transforms::{discrete_gradient, haar_wavelet};
use devopt_core::objectives::l1_of_orthogonal;
use devopt_core::{ProxFn, Tensor};
use proptest::prelude::*;

fn smooth_fns(seed: u64) -> Vec<SmoothFn> {
    let mut r = rng(seed);
    let a = gaussian_matrix(12, 8, &mut r);
    let y = randn(&[12], &mut r);
    let ls = least_squares(Arc::new(a), y).unwrap();
    let d = Arc::new(discrete_gradient(6).unwrap());
    let hub = huber_tv(d.clone(), 0.3, 0.05).unwrap();
    let img = small_huber(8, seed).smooth_part();
    vec![ls, hub.clone(), sum_smooth(&hub, &huber_tv(d, 0.1, 0.2).unwrap()).unwrap(), img]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn descent_lemma_and_lipschitz_gradient(seed in 0u64..1000, scale in 0.01f64..10.0) {
        for f in smooth_fns(seed) {
            let mut r = rng(seed + 1);
            let x = randn(f.shape(), &mut r).scale(scale);
            let y = randn(f.shape(), &mut r).scale(scale);
            let gx = f.gradient(&x);
            let d = y.sub(&x);
            let upper = f.value(&x) + gx.dot(&d) + d.norm_sq() / (2.0 * f.beta());
            prop_assert!(f.value(&y) <= upper + 1e-9 * (1.0 + upper.abs()));
            // convexity from below
            prop_assert!(f.value(&y) >= f.value(&x) + gx.dot(&d) - 1e-9 * (1.0 + f.value(&y).abs()));
            let lip = f.gradient(&y).sub(&gx).norm();
            prop_assert!(lip <= d.norm() / f.beta() * (1.0 + 1e-9) + 1e-12);
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    for f in smooth_fns(3) {
        let mut r = rng(9);
        let x = randn(f.shape(), &mut r);
        let g = f.gradient(&x);
        let h = 1e-6;
        for i in (0..x.len()).step_by(3) {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data_mut()[i] += h;
            xm.data_mut()[i] -= h;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
            assert!(close(fd, g.data()[i], 1e-5), "coordinate {i}: {fd} vs {}", g.data()[i]);
        }
    }
}

fn proxes() -> Vec<(ProxFn, Vec<usize>)> {
    let haar = Arc::new(haar_wavelet(16, 2).unwrap());
    vec![
        (ProxFn::zero(&[7]).unwrap(), vec![7]),
        (ProxFn::l1(&[9], 0.7).unwrap(), vec![9]),
        (l1_of_orthogonal(haar, 0.05, 1.0).unwrap(), vec![16, 16]),
    ]
}

#[test]
fn proxes_are_firmly_nonexpansive_and_satisfy_the_variational_inequality() {
    let mut r = rng(17);
    for (g, shape) in proxes() {
        for trial in 0..100 {
            let gamma = 0.05 + 2.0 * (trial as f64) / 100.0;
            let x = randn(&shape, &mut r);
            let y = randn(&shape, &mut r).scale(0.3);
            let z = randn(&shape, &mut r);
            let (px, py) = (g.prox(&x, gamma), g.prox(&y, gamma));
            let dp = px.sub(&py);
            assert!(dp.norm_sq() <= dp.dot(&x.sub(&y)) + 1e-12);
            // <x - p, z - p> <= gamma (g(z) - g(p))
            let lhs = x.sub(&px).dot(&z.sub(&px));
            let rhs = gamma * (g.value(&z) - g.value(&px));
            assert!(lhs <= rhs + 1e-10, "{lhs} > {rhs}");
        }
    }
}

#[test]
fn soft_threshold_matches_grid_search() {
    let mut r = rng(5);
    let step = 1e-5;
    for _ in 0..50 {
        let v = 4.0 * randn(&[1], &mut r).data()[0];
        let t = 0.01 + randn(&[1], &mut r).data()[0].abs();
        // minimize t|z| + (z - v)^2 / 2 on a grid around v
        let obj = |z: f64| t * z.abs() + 0.5 * (z - v) * (z - v);
        let best = (0..=2_000_000)
            .map(|k| v - 10.0 + k as f64 * step)
            .chain([0.0])
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap();
        let p = soft_threshold_scalar(v, t);
        assert!((p - best).abs() <= step, "v {v} t {t}: {p} vs {best}");
        assert!(obj(p) <= obj(best) + 1e-15);
    }
}

#[test]
fn orthogonal_l1_prox_matches_coefficient_shrinkage() {
    let w = Arc::new(haar_wavelet(8, 3).unwrap());
    let g = l1_of_orthogonal(w.clone(), 0.2, 1.0).unwrap();
    let x = randn(&[8, 8], &mut rng(2));
    let p = g.prox(&x, 0.5);
    use devopt_core::LinearMap;
    let coeff = w.apply(&p);
    let expect = w.apply(&x).map(|c| soft_threshold_scalar(c, 0.1));
    assert!(coeff.sub(&expect).max_abs() < 1e-12);
    assert_eq!(Tensor::zeros(&[8, 8]).unwrap(), g.prox(&Tensor::zeros(&[8, 8]).unwrap(), 3.0));
}
