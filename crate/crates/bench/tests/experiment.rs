use devopt_bench::experiment::run_experiment_with;
use devopt_bench::export::{csv_name, export_curves, load_manifest, load_trace, save_trace, MANIFEST};
use devopt_bench::{run_experiment, ExperimentConfig, LearnedNets, Operators, ProblemKind, Solver};
use devopt_core::learned::{ConvNet, FB_FIRST_CHANNELS, FB_SECOND_CHANNELS, SMOOTH_CHANNELS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(kind: ProblemKind, solvers: &[Solver]) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.size = 16;
    c.angles = 16;
    c.wavelet_levels = 2;
    c.iters = 60;
    c.test_problems = 3;
    c.reference_budget = 1000;
    c.solvers = solvers.to_vec();
    c
}

/// Untrained networks: their final layer is zero, so they reproduce the baselines.
fn fresh_nets() -> LearnedNets {
    let mut r = ChaCha8Rng::seed_from_u64(0);
    LearnedNets {
        smooth: Some(ConvNet::new(SMOOTH_CHANNELS, &mut r).unwrap()),
        fb: Some((
            ConvNet::new(FB_FIRST_CHANNELS, &mut r).unwrap(),
            ConvNet::new(FB_SECOND_CHANNELS, &mut r).unwrap(),
        )),
        ..LearnedNets::default()
    }
}

#[test]
fn smooth_experiment_curves_and_certificates() {
    let c = small(ProblemKind::HuberTv, &[Solver::Gd, Solver::Nesterov, Solver::Random, Solver::Learned]);
    let res = run_experiment(&c, &fresh_nets()).unwrap();
    assert_eq!(res.problems.len(), 3);
    for p in &res.problems {
        let lowest = p.runs.iter().flat_map(|r| r.objectives.iter().copied()).fold(f64::INFINITY, f64::min);
        assert!(p.fstar <= lowest + 1e-12);
        assert!(p.fstar <= p.reference);
        let gd = &p.runs[0].objectives;
        assert_eq!(gd.len(), c.iters + 1);
        assert!(gd.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        // the untrained rule is plain gradient descent
        assert_eq!(&p.runs[3].objectives, gd);
    }
    let curves = res.curves();
    assert_eq!(curves.len(), 4);
    let gd = &curves[0];
    assert_eq!(gd.rows.len(), c.iters);
    assert!(gd.rows.windows(2).all(|w| w[1].mean_gap <= w[0].mean_gap));
    assert!(gd.rows.iter().all(|r| r.min_gap <= r.mean_gap && r.mean_gap <= r.max_gap && r.min_gap >= 0.0));
    let rep = res.report();
    assert_eq!(rep.checks, (c.iters - 1) * 2 * c.test_problems);
    assert!(rep.ok(), "{:?}", rep.first_failures);
    assert_eq!(rep.per_solver.len(), 2);
}

#[test]
fn fb_experiment_curves_and_certificates() {
    let c = small(ProblemKind::WaveletL1, &[Solver::Ista, Solver::Fista, Solver::Random, Solver::Learned]);
    let res = run_experiment(&c, &fresh_nets()).unwrap();
    for p in &res.problems {
        let lowest = p.runs.iter().flat_map(|r| r.objectives.iter().copied()).fold(f64::INFINITY, f64::min);
        assert!(p.fstar <= lowest + 1e-12);
        assert_eq!(p.runs[3].objectives, p.runs[0].objectives);
    }
    let ista = &res.curves()[0];
    assert!(ista.rows.windows(2).all(|w| w[1].mean_gap <= w[0].mean_gap));
    let rep = res.report();
    assert_eq!(rep.checks, (c.iters - 1) * 2 * c.test_problems);
    assert!(rep.ok(), "{:?}", rep.first_failures);
}

#[test]
fn diverging_runs_are_flagged_without_aborting() {
    let mut nets = fresh_nets();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut wild = ConvNet::new(SMOOTH_CHANNELS, &mut r).unwrap();
    wild.params_mut().iter_mut().for_each(|p| *p = 1e200);
    nets.smooth_raw = Some(wild);
    let c = small(ProblemKind::HuberTv, &[Solver::Gd, Solver::LearnedUnnormalized]);
    let res = run_experiment(&c, &nets).unwrap();
    let curves = res.curves();
    assert_eq!(curves[0].finished, 3);
    assert_eq!(curves[1].finished, 0);
    assert_eq!(curves[1].diverged_seeds, res.problems.iter().map(|p| p.seed).collect::<Vec<_>>());
    assert!(curves[1].rows.is_empty());
    assert!(res.problems.iter().all(|p| p.runs[1].diverged.is_some() && p.runs[1].objectives.is_empty()));
    // the unsafeguarded rule carries no certificate
    assert!(res.report().per_solver.is_empty());

    // a missing network is a configuration error
    let c = small(ProblemKind::HuberTv, &[Solver::Learned]);
    assert!(run_experiment(&c, &LearnedNets::default()).is_err());
}

#[test]
fn exports_are_complete_and_byte_stable() {
    let c = small(ProblemKind::WaveletL1, &[Solver::Ista, Solver::Random]);
    let ops = Operators::build(&c).unwrap();
    let nets = LearnedNets::default();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_experiment_with(&c, &ops, &nets).unwrap();
    let files_a = export_curves(&first, a.path()).unwrap();
    save_trace(&first, a.path()).unwrap();
    let second = run_experiment_with(&c, &ops, &nets).unwrap();
    let files_b = export_curves(&second, b.path()).unwrap();
    save_trace(&second, b.path()).unwrap();
    assert_eq!(files_a.len(), 3);
    for (fa, fb) in files_a.iter().zip(&files_b) {
        assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{}", fa.display());
    }

    for s in &c.solvers {
        let body = std::fs::read_to_string(a.path().join(csv_name(*s))).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next(), Some("n,mean_gap,min_gap,max_gap"));
        assert_eq!(lines.count(), c.iters);
    }

    let m = load_manifest(&a.path().join(MANIFEST)).unwrap();
    assert_eq!(m.config, c);
    assert_eq!(m.fstar.len(), c.test_problems);
    assert_eq!(m.certificate, first.report());
    assert_eq!(serde_json::to_string_pretty(&m).unwrap() + "\n", std::fs::read_to_string(a.path().join(MANIFEST)).unwrap());

    // wall times are not serialized, so compare the written form
    let trace = load_trace(&a.path().join("trace.json")).unwrap();
    assert_eq!(serde_json::to_string(&trace).unwrap(), serde_json::to_string(&first).unwrap());
    let c2 = tempfile::tempdir().unwrap();
    export_curves(&trace, c2.path()).unwrap();
    for f in &files_a {
        let name = f.file_name().unwrap();
        assert_eq!(std::fs::read(f).unwrap(), std::fs::read(c2.path().join(name)).unwrap());
    }
}
