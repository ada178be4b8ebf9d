mod common;

use std::sync::Arc;

use common::*;
use devopt_core::nonsmooth::{
    baseline_fista, baseline_ista, fb_step, feasibility_lhs, feasibility_rhs, lyapunov_value, run_fb, FbContext,
    FbOptions, FbRule, FbState, FistaRule, GammaSchedule, RandomFbRule, RandomFeasibleFbRule, ZeroFbRule,
};
use devopt_core::objectives::{weighted_least_squares, least_squares};
use devopt_core::smooth::next_t;
use devopt_core::tensor::randn;
use devopt_core::{CompositeProblem, Identity, ProxFn, Tensor};
use proptest::prelude::*;

const HALF: GammaSchedule = GammaSchedule::Constant(0.5);

#[test]
fn lyapunov_sequence_decreases_and_dominates_the_objective() {
    let a = ray32();
    let mut probs: Vec<CompositeProblem> = (0..10).map(lasso).collect();
    probs.extend((0..2).map(|s| wavelet_toy(&a, 50 + s)));
    for (i, p) in probs.iter().enumerate() {
        assert_eq!(p.f.beta(), 0.5);
        let mut rule = RandomFeasibleFbRule::new(0.5, 0.5, i as u64);
        let t = run_fb(p, &mut rule, &zeros_like(p), &HALF, &FbOptions::new(1000)).unwrap();
        assert!(t.all_feasible(), "problem {i}");
        assert!(t.records.iter().all(|r| !r.enforced));
        assert!(t.lyapunov_monotone(1e-9), "problem {i}");
        assert!(t.lyapunov_dominates(1e-10), "problem {i}");
    }
}

#[test]
fn bound_matches_recomputation_from_history() {
    let p = lasso(3);
    let beta = p.f.beta();
    let x0 = zeros_like(&p);
    let t = run_fb(&p, &mut RandomFeasibleFbRule::new(0.4, 0.7, 9), &x0, &HALF, &FbOptions::new(40)).unwrap();
    // replay with the same rule stream, keeping the raw history
    let mut rule = RandomFeasibleFbRule::new(0.4, 0.7, 9);
    let mut state = FbState::initial(&x0, 0.5);
    let (mut x_prev, mut w_prev, mut gw_prev, mut d2_prev) = (x0.clone(), x0.clone(), x0.clone(), x0.clone());
    for (n, rec) in t.records.iter().enumerate() {
        let (d1, d2) = if n == 0 {
            (Tensor::zeros_like(&x0), Tensor::zeros_like(&x0))
        } else {
            let ctx = FbContext {
                state: &state,
                problem: &p,
                beta,
                gamma: 0.5,
            };
            let d1 = rule.propose_first(&ctx).unwrap();
            let gw = p.f.gradient(&state.x.add(&d1));
            let d2 = rule.propose_second(&ctx, &d1, &gw).unwrap();
            // independent evaluation of both sides from the stored history
            let r1 = state.x.sub(&x_prev).add_scaled(-beta / (2.0 * beta - 0.5), &d2_prev).norm_sq();
            let r2 = gw.sub(&gw_prev).add_scaled(-1.0 / beta, &state.x.sub(&w_prev)).norm_sq();
            let rhs = 0.4 * (2.0 * beta - 0.5) / (2.0 * beta * 0.5) * r1 + beta * 0.7 / 2.0 * r2;
            assert!(close(rhs, rec.rhs, 1e-12), "n {n}: {rhs} vs {}", rec.rhs);
            let lhs = d1.norm_sq() / (2.0 * beta) + beta / (2.0 * 0.5 * (2.0 * beta - 0.5)) * d2.norm_sq();
            assert!(close(lhs, rec.lhs, 1e-12));
            (d1, d2)
        };
        let next = fb_step(&state, &d1, &d2, &p, 0.5).unwrap();
        let (v, combined) = lyapunov_value(&next, &p);
        assert_eq!((v, combined), (rec.lyapunov, rec.combined));
        // V_n from scratch
        let w = state.x.add(&d1);
        let gw = p.f.gradient(&w);
        let dx = next.x.sub(&w);
        let v2 = p.f.value(&w) + p.g.value(&next.x) + gw.dot(&dx) + dx.norm_sq() / (2.0 * beta);
        assert!(close(v, v2, 1e-12));
        x_prev = state.x.clone();
        w_prev = w;
        gw_prev = gw;
        d2_prev = d2;
        state = next;
    }
    assert_eq!(state.x, t.x_final);
}

#[test]
fn rhs_needs_history_and_vanishes_without_weights() {
    let p = lasso(1);
    let s0 = FbState::initial(&zeros_like(&p), 0.5);
    assert!(feasibility_rhs(&s0, &zeros_like(&p), 0.5, 0.5, 0.5).is_err());
    let d = randn(p.shape(), &mut rng(1));
    let s1 = fb_step(&s0, &d, &d, &p, 0.5).unwrap();
    let gw = p.f.gradient(&s1.x);
    assert_eq!(feasibility_rhs(&s1, &gw, 0.5, 0.0, 0.0).unwrap(), 0.0);
    assert_eq!(feasibility_lhs(&Tensor::vector(vec![1.0]).unwrap(), &Tensor::vector(vec![0.0]).unwrap(), 0.5, 0.5), 1.0);
    assert_eq!(feasibility_lhs(&Tensor::vector(vec![0.0]).unwrap(), &Tensor::vector(vec![1.0]).unwrap(), 0.5, 0.5), 1.0);
}

#[test]
fn zero_rule_is_exactly_ista() {
    let a = ray32();
    for p in [lasso(4), wavelet_toy(&a, 4)] {
        let x0 = zeros_like(&p);
        let ista = baseline_ista(&p, &x0, &HALF, 100).unwrap();
        let run = run_fb(&p, &mut ZeroFbRule, &x0, &HALF, &FbOptions::new(100)).unwrap();
        assert_eq!(ista.objectives, run.objectives);
        assert_eq!(ista.x_final, run.x_final);
        assert!(ista.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn fista_as_deviations_matches_fista() {
    let a = ray32();
    for (k, p) in [lasso(5), lasso(6), wavelet_toy(&a, 6)].iter().enumerate() {
        let x0 = zeros_like(p);
        let gammas = if k == 1 { GammaSchedule::Constant(0.3) } else { HALF };
        let mut opts = FbOptions::new(50);
        opts.enforce = false;
        opts.keep_iterates = true;
        let run = run_fb(p, &mut FistaRule::new(), &x0, &gammas, &opts).unwrap();
        let direct = devopt_core::nonsmooth::accelerated(p, &x0, &gammas, 50, true, true).unwrap();
        for (u, v) in run.iterates.unwrap().iter().zip(direct.iterates.unwrap()) {
            assert!(u.sub(&v).norm() <= 1e-12 * v.norm().max(1e-300), "problem {k}");
        }
        for (u, v) in run.objectives.iter().zip(&direct.objectives) {
            assert!(close(*u, *v, 1e-12));
        }
        // first step carries no momentum
        assert_eq!((run.records[0].dev1_norm, run.records[0].dev2_norm), (0.0, 0.0));
    }
    assert!((next_t(1.0) - 1.618_033_988_7).abs() < 1e-10);
}

#[test]
fn fista_second_deviation_vanishes_at_gamma_beta() {
    let p = lasso(8);
    let x0 = zeros_like(&p);
    let mut rule = FistaRule::new();
    let s0 = FbState::initial(&x0, 0.5);
    let (d1, d2) = rule.deviations(&s0, 0.5, 0.5);
    assert_eq!((d1.norm(), d2.norm()), (0.0, 0.0));
    let s1 = fb_step(&s0, &d1, &d2, &p, 0.5).unwrap();
    let (_, d2) = rule.deviations(&s1, 0.5, 0.5);
    assert_eq!(d2.norm(), 0.0);
}

#[test]
fn scalar_l1_step_by_hand() {
    // f = x^2 / 2 (beta = 1), g = |x|, gamma = 1, x = 3: prox_1(3 - 3) = 0
    let y = Tensor::vector(vec![0.0]).unwrap();
    let f = weighted_least_squares(Arc::new(Identity::new(&[1]).unwrap()), y.clone(), 0.5).unwrap();
    let p = CompositeProblem::forward_backward(f, ProxFn::l1(&[1], 1.0).unwrap(), y).unwrap();
    assert_eq!(p.f.beta(), 1.0);
    let x = Tensor::vector(vec![3.0]).unwrap();
    let t = baseline_ista(&p, &x, &GammaSchedule::Constant(1.0), 1).unwrap();
    assert_eq!(t.x_final.data(), &[0.0]);
    // from x = 5 the step lands on soft_threshold(0, 1) = 0 as well
    let s = FbState::initial(&Tensor::vector(vec![5.0]).unwrap(), 1.0);
    let z = Tensor::zeros(&[1]).unwrap();
    assert_eq!(fb_step(&s, &z, &z, &p, 1.0).unwrap().x.data(), &[0.0]);
    assert!(fb_step(&s, &z, &z, &p, 2.0).is_err());
}

#[test]
fn lyapunov_at_a_fixed_point_is_the_objective() {
    let p = lasso(2);
    let xs = baseline_fista(&p, &zeros_like(&p), &HALF, 3000).unwrap().x_final;
    let z = Tensor::zeros_like(&xs);
    let mut s = FbState::initial(&xs, 0.5);
    s.n = 1;
    let next = fb_step(&s, &z, &z, &p, 0.5).unwrap();
    let (v, _) = lyapunov_value(&next, &p);
    assert!(close(v, p.objective(&xs), 1e-9));
}

#[test]
fn smooth_special_case_reduces_to_simplified_bound() {
    // g = 0 and gamma = beta: 2 beta lhs = |d1|^2 + |d2|^2 and
    // 2 beta rhs = ka |beta grad f(w_{n-1}) - d1_{n-1}|^2 + kb |beta grad f(w_n) - d2_{n-1}|^2
    let mut r = rng(21);
    for trial in 0..50 {
        let (m, d) = (20, 12);
        let a = gaussian_matrix(m, d, &mut r);
        let y = randn(&[m], &mut r);
        let p = CompositeProblem::forward_backward(
            least_squares(Arc::new(a), y.clone()).unwrap(),
            ProxFn::zero(&[d]).unwrap(),
            y,
        )
        .unwrap();
        let beta = p.f.beta();
        let (ka, kb) = (0.3, 0.8);
        let mut s = FbState::initial(&randn(&[d], &mut r), beta);
        for _ in 0..3 {
            let (d1, d2) = (randn(&[d], &mut r).scale(0.1), randn(&[d], &mut r).scale(0.1));
            s = fb_step(&s, &d1, &d2, &p, beta).unwrap();
        }
        let (d1, d2) = (randn(&[d], &mut r), randn(&[d], &mut r));
        let gw = p.f.gradient(&s.x.add(&d1));
        let lhs = 2.0 * beta * feasibility_lhs(&d1, &d2, beta, beta);
        let rhs = 2.0 * beta * feasibility_rhs(&s, &gw, beta, ka, kb).unwrap();
        let simple_l = d1.norm_sq() + d2.norm_sq();
        let simple_r = ka * s.grad_w_prev.scale(beta).sub(&s.dev1_prev).norm_sq()
            + kb * gw.scale(beta).sub(&s.dev2_prev).norm_sq();
        assert!(close(lhs, simple_l, 1e-12), "trial {trial}");
        assert!(close(rhs, simple_r, 1e-12), "trial {trial}: {rhs} vs {simple_r}");
    }
}

#[test]
fn increments_are_summable() {
    let p = lasso(13);
    let t = run_fb(&p, &mut RandomFeasibleFbRule::new(0.5, 0.5, 3), &zeros_like(&p), &HALF, &FbOptions::new(5000))
        .unwrap();
    let tail = |f: &dyn Fn(&devopt_core::nonsmooth::FbRecord) -> f64| -> f64 {
        t.records[2500..].iter().map(f).sum()
    };
    assert!(tail(&|r| r.step_norm * r.step_norm) <= 1e-6);
    assert!(tail(&|r| r.dev1_norm * r.dev1_norm) <= 1e-6);
    assert!(tail(&|r| r.dev2_norm * r.dev2_norm) <= 1e-6);
}

#[test]
fn fista_reaches_small_gap_before_ista() {
    let a = ray32();
    let p = wavelet_toy(&a, 77);
    let x0 = zeros_like(&p);
    let fs = baseline_fista(&p, &x0, &HALF, 5000).unwrap().objectives.into_iter().fold(f64::INFINITY, f64::min);
    let first = |o: &[f64]| o.iter().position(|f| f - fs <= 1e-4).unwrap_or(usize::MAX);
    let ista = baseline_ista(&p, &x0, &HALF, 2000).unwrap();
    let fista = baseline_fista(&p, &x0, &HALF, 2000).unwrap();
    assert!(first(&fista.objectives) < first(&ista.objectives));
    assert_eq!(fista.objectives[1], ista.objectives[1]);
}

#[test]
fn enforcement_repairs_infeasible_pairs() {
    let a = ray32();
    for p in [lasso(30), wavelet_toy(&a, 30)] {
        let t = run_fb(&p, &mut RandomFbRule::new(0.5, 0.5, 2.0, 1), &zeros_like(&p), &HALF, &FbOptions::new(200))
            .unwrap();
        assert!(t.records.iter().any(|r| r.enforced));
        for r in &t.records {
            assert_eq!(r.feasible, devopt_core::within_bound(r.lhs, r.rhs));
            assert!(devopt_core::within_bound(r.accepted_lhs, r.accepted_rhs));
        }
        assert!(t.lyapunov_monotone(1e-9));
        assert!(t.lyapunov_dominates(1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn certificates_hold_for_random_weights_and_steps(seed in 0u64..1000, ka in 0.0f64..0.99, kb in 0.0f64..0.99, g in 0.05f64..0.95) {
        let p = lasso(seed);
        let gammas = GammaSchedule::Constant(g);
        let t = run_fb(&p, &mut RandomFeasibleFbRule::new(ka, kb, seed), &zeros_like(&p), &gammas, &FbOptions::new(150)).unwrap();
        prop_assert!(t.lyapunov_monotone(1e-9));
        prop_assert!(t.lyapunov_dominates(1e-10));
    }
}
