use std::sync::Arc;

use devopt_bench::problem::{assemble, is_test_seed, test_seeds};
use devopt_bench::{make_problem, reference_optimum, ExperimentConfig, Operators, ProblemKind};
use devopt_core::objectives::least_squares;
use devopt_core::tensor::randn;
use devopt_core::{CompositeProblem, DenseMatrix, Identity, ProxFn, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(kind: ProblemKind) -> ExperimentConfig {
    ExperimentConfig::new(kind)
}

#[test]
fn clean_zero_truth_gives_zero_data_and_optimum() {
    for kind in [ProblemKind::HuberTv, ProblemKind::WaveletL1] {
        let mut c = cfg(kind);
        c.noise = 0.0;
        let ops = Operators::build(&c).unwrap();
        let inst = assemble(&c, &ops, Tensor::zeros(&[32, 32]).unwrap(), 3).unwrap();
        let zero = Tensor::zeros(&[32, 32]).unwrap();
        assert_eq!(inst.problem.objective(&zero), 0.0);
        assert_eq!(inst.problem.f.gradient(&zero).max_abs(), 0.0);
        let fs = reference_optimum(&c, &inst.problem, &inst.x0, 1000).unwrap();
        assert_eq!(fs, 0.0);
    }
}

#[test]
fn smoothness_constants_match_the_closed_forms() {
    let c = cfg(ProblemKind::HuberTv);
    let p = make_problem(&c, 1).unwrap().problem;
    let inv = 1.0 / p.smooth_part().beta();
    assert!((inv - (2.0 + 8.0 * 0.0015 / 0.01)).abs() < 1e-12, "{inv}");
    assert!((inv - 3.2).abs() < 1e-12);
    let p = make_problem(&cfg(ProblemKind::WaveletL1), 1).unwrap().problem;
    assert!((1.0 / p.f.beta() - 2.0).abs() < 1e-12);
    assert_eq!(p.f.beta(), 0.5);
}

#[test]
fn noise_has_the_configured_relative_size() {
    let c = cfg(ProblemKind::HuberTv);
    let ops = Operators::build(&c).unwrap();
    let inst = make_problem(&c, 7).unwrap();
    let clean = ops.forward.apply(&inst.truth);
    let y = inst.problem.data.clone();
    let rel = y.sub(&clean).norm() / clean.norm();
    assert!((rel - 0.05).abs() < 1e-12, "{rel}");
    assert_eq!(make_problem(&c, 7).unwrap().problem.data, y);
}

#[test]
fn reference_optimum_finds_analytic_minimizers() {
    let c = cfg(ProblemKind::HuberTv);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // square diagonal system: F* = 0
    let sig: Vec<f64> = (0..40).map(|i| 0.5 + 0.5 * i as f64 / 39.0).collect();
    let y = randn(&[40], &mut rng);
    let p = CompositeProblem::smooth(
        least_squares(Arc::new(DenseMatrix::diagonal(&sig).unwrap()), y.clone()).unwrap(),
        None,
        y,
    )
    .unwrap();
    let fs = reference_optimum(&c, &p, &Tensor::zeros(&[40]).unwrap(), 1000).unwrap();
    assert!(fs.abs() <= 1e-8, "{fs}");

    // |x - y|^2 + lam |x|_1 is minimized by soft thresholding at lam / 2
    let y = randn(&[30], &mut rng);
    let lam = 0.8;
    let p = CompositeProblem::forward_backward(
        least_squares(Arc::new(Identity::new(&[30]).unwrap()), y.clone()).unwrap(),
        ProxFn::l1(&[30], lam).unwrap(),
        y.clone(),
    )
    .unwrap();
    let xs = y.map(|v| v.signum() * (v.abs() - lam / 2.0).max(0.0));
    let exact = p.objective(&xs);
    let fs = reference_optimum(&cfg(ProblemKind::WaveletL1), &p, &Tensor::zeros(&[30]).unwrap(), 1000).unwrap();
    assert!((fs - exact).abs() <= 1e-8, "{fs} vs {exact}");
    assert!(reference_optimum(&c, &p, &Tensor::zeros(&[30]).unwrap(), 999).is_err());
}

#[test]
fn doubling_the_reference_budget_barely_moves_the_optimum() {
    for kind in [ProblemKind::HuberTv, ProblemKind::WaveletL1] {
        let c = cfg(kind);
        let inst = make_problem(&c, test_seeds(0, 1)[0]).unwrap();
        let a = reference_optimum(&c, &inst.problem, &inst.x0, 5000).unwrap();
        let b = reference_optimum(&c, &inst.problem, &inst.x0, 10_000).unwrap();
        assert!(b <= a);
        assert!(a - b < 1e-7, "{kind:?}: {a} vs {b}");
    }
}

#[test]
fn seed_pools_are_disjoint() {
    let test = test_seeds(0, 50);
    assert_eq!(test.len(), 50);
    assert!(test.iter().all(|&s| is_test_seed(s)));
    assert!(test.windows(2).all(|w| w[0] < w[1]));
    let frac = (0..5000u64).filter(|&s| is_test_seed(s)).count() as f64 / 5000.0;
    assert!((0.07..0.13).contains(&frac), "{frac}");
}
