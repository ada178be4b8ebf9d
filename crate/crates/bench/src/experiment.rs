//! Running every configured solver on the held-out problems.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use devopt_core::learned::{LearnedFbRule, LearnedSmoothRule};
use devopt_core::nonsmooth::{baseline_fista, baseline_ista, run_fb, FbOptions, FbTrace, RandomFeasibleFbRule};
use devopt_core::smooth::{baseline_gd, baseline_nesterov, run_smooth, RandomFeasibleRule, SmoothOptions, SmoothTrace};
use devopt_core::{CompositeProblem, Tensor};
use serde::{Deserialize, Serialize};

use crate::certify::{fb_checks, smooth_checks, CheckTally};
use crate::config::{ExperimentConfig, Solver};
use crate::error::{BenchError, Result};
use crate::problem::{make_problem_with, test_seeds, Instance, Operators};
use crate::train::{gammas, LearnedNets};

/// One solver on one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub solver: Solver,
    /// `F(x_0), ..., F(x_iters)`; empty when the run diverged.
    pub objectives: Vec<f64>,
    pub diverged: Option<String>,
    /// Present for solvers whose certificates are checked.
    pub certificate: Option<CheckTally>,
    /// Excluded from every written file so outputs stay byte-stable.
    #[serde(skip)]
    pub wall: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub seed: u64,
    /// Best objective of the long reference run alone.
    pub reference: f64,
    /// `min` over the reference run and every recorded objective.
    pub fstar: f64,
    /// Which run attained `fstar`.
    pub fstar_source: String,
    pub runs: Vec<RunRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub problems: Vec<ProblemRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: usize,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
}

/// Gap `F(x_n) - F*` aggregated over the problems a solver finished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub solver: Solver,
    /// `n = 1, ..., iters`.
    pub rows: Vec<CurveRow>,
    /// Mean initial gap `F(x_0) - F*`.
    pub initial_gap: Option<f64>,
    pub finished: usize,
    pub diverged_seeds: Vec<u64>,
    #[serde(skip)]
    pub wall: Duration,
}

impl CurveRecord {
    /// Mean gap after `n` steps.
    pub fn mean_at(&self, n: usize) -> Option<f64> {
        self.rows.get(n.checked_sub(1)?).map(|r| r.mean_gap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solver: Solver,
    pub checks: usize,
    pub failures: usize,
    pub enforced_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub checks: usize,
    pub passed: usize,
    pub failures: usize,
    pub per_solver: Vec<SolverReport>,
    /// `(solver, seed, n, what)` of the first few failures.
    pub first_failures: Vec<(Solver, u64, usize, String)>,
}

impl CertificateReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }
}

const REPORTED_FAILURES: usize = 20;

impl ExperimentResult {
    pub fn curves(&self) -> Vec<CurveRecord> {
        let iters = self.config.iters;
        self.config
            .solvers
            .iter()
            .map(|&solver| {
                let mut finished: Vec<(&[f64], f64)> = Vec::new();
                let mut diverged_seeds = Vec::new();
                let mut wall = Duration::ZERO;
                for p in &self.problems {
                    for r in p.runs.iter().filter(|r| r.solver == solver) {
                        wall += r.wall;
                        if r.diverged.is_some() {
                            diverged_seeds.push(p.seed);
                        } else {
                            finished.push((&r.objectives, p.fstar));
                        }
                    }
                }
                let gaps_at = |n: usize| -> Vec<f64> { finished.iter().map(|(o, f)| o[n] - f).collect() };
                let rows = if finished.is_empty() {
                    Vec::new()
                } else {
                    (1..=iters)
                        .map(|n| {
                            let g = gaps_at(n);
                            CurveRow {
                                n,
                                mean_gap: g.iter().sum::<f64>() / g.len() as f64,
                                min_gap: g.iter().copied().fold(f64::INFINITY, f64::min),
                                max_gap: g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                            }
                        })
                        .collect()
                };
                let g0 = gaps_at(0);
                CurveRecord {
                    solver,
                    rows,
                    initial_gap: (!g0.is_empty()).then(|| g0.iter().sum::<f64>() / g0.len() as f64),
                    finished: finished.len(),
                    diverged_seeds,
                    wall,
                }
            })
            .collect()
    }

    pub fn report(&self) -> CertificateReport {
        let mut rep = CertificateReport::default();
        for &solver in self.config.solvers.iter().filter(|s| s.enforced()) {
            let mut sr = SolverReport {
                solver,
                checks: 0,
                failures: 0,
                enforced_steps: 0,
            };
            for p in &self.problems {
                for r in p.runs.iter().filter(|r| r.solver == solver) {
                    let t = r.certificate.as_ref().expect("enforced runs carry a tally");
                    sr.checks += t.checks;
                    sr.failures += t.failures.len();
                    sr.enforced_steps += t.enforced;
                    for f in &t.failures {
                        if rep.first_failures.len() < REPORTED_FAILURES {
                            rep.first_failures.push((solver, p.seed, f.n, f.what.clone()));
                        }
                    }
                }
            }
            rep.checks += sr.checks;
            rep.failures += sr.failures;
            rep.per_solver.push(sr);
        }
        rep.passed = rep.checks - rep.failures;
        rep
    }
}

/// Smallest objective of `budget` accelerated iterations (Nesterov for the
/// gradient scheme, FISTA otherwise) from `x0`.
pub fn reference_optimum(cfg: &ExperimentConfig, problem: &CompositeProblem, x0: &Tensor, budget: usize) -> Result<f64> {
    if budget < 1000 {
        return Err(BenchError::Invalid(format!("reference budget {budget} is below 1000")));
    }
    let objectives = if problem.is_smooth() {
        baseline_nesterov(problem, x0, budget)?.objectives
    } else {
        baseline_fista(problem, x0, &gammas(cfg, problem.f.beta()), budget)?.objectives
    };
    Ok(objectives.into_iter().fold(f64::INFINITY, f64::min))
}

enum Trace {
    Smooth(SmoothTrace),
    Fb(FbTrace),
}

fn solve(cfg: &ExperimentConfig, nets: &LearnedNets, solver: Solver, inst: &Instance) -> Result<devopt_core::Result<Trace>> {
    let (p, x0, iters) = (&inst.problem, &inst.x0, cfg.iters);
    let missing = |what: &str| BenchError::Missing(format!("solver {solver} needs a trained {what} network"));
    let rule_seed = inst.seed ^ 0x7a9d_0c11;
    if cfg.is_smooth() {
        let mut opts = SmoothOptions::new(iters);
        let run = match solver {
            Solver::Gd => baseline_gd(p, x0, iters),
            Solver::Nesterov => baseline_nesterov(p, x0, iters),
            Solver::Random => run_smooth(p, &mut RandomFeasibleRule::new(cfg.eps, rule_seed), x0, &opts),
            Solver::Learned => {
                let net = nets.smooth.clone().ok_or_else(|| missing("gradient-scheme"))?;
                run_smooth(p, &mut LearnedSmoothRule::new(net, cfg.eps), x0, &opts)
            }
            Solver::LearnedUnnormalized => {
                let net = nets.smooth_raw.clone().ok_or_else(|| missing("raw gradient-scheme"))?;
                opts.enforce = false;
                run_smooth(p, &mut LearnedSmoothRule::unnormalized(net, cfg.eps), x0, &opts)
            }
            Solver::Ista | Solver::Fista => unreachable!("rejected by validation"),
        };
        Ok(run.map(Trace::Smooth))
    } else {
        let g = gammas(cfg, p.f.beta());
        let kappa = (cfg.kappa_a, cfg.kappa_b);
        let mut opts = FbOptions::new(iters);
        let run = match solver {
            Solver::Ista => baseline_ista(p, x0, &g, iters),
            Solver::Fista => baseline_fista(p, x0, &g, iters),
            Solver::Random => run_fb(p, &mut RandomFeasibleFbRule::new(kappa.0, kappa.1, rule_seed), x0, &g, &opts),
            Solver::Learned => {
                let (a, b) = nets.fb.clone().ok_or_else(|| missing("forward-backward"))?;
                run_fb(p, &mut LearnedFbRule::new(a, b, kappa), x0, &g, &opts)
            }
            Solver::LearnedUnnormalized => {
                let (a, b) = nets.fb_raw.clone().ok_or_else(|| missing("raw forward-backward"))?;
                opts.enforce = false;
                run_fb(p, &mut LearnedFbRule::unnormalized(a, b, kappa), x0, &g, &opts)
            }
            Solver::Gd | Solver::Nesterov => unreachable!("rejected by validation"),
        };
        Ok(run.map(Trace::Fb))
    }
}

fn run_one(cfg: &ExperimentConfig, nets: &LearnedNets, solver: Solver, inst: &Instance) -> Result<RunRecord> {
    let start = Instant::now();
    let outcome = solve(cfg, nets, solver, inst)?;
    let wall = start.elapsed();
    let (objectives, diverged, certificate) = match outcome {
        Ok(Trace::Smooth(t)) => {
            let cert = solver.enforced().then(|| smooth_checks(&t, cfg.iters));
            // a run stopped at a stationary point keeps its last value
            let mut obj = t.objectives;
            let last = *obj.last().expect("objectives never empty");
            obj.resize(cfg.iters + 1, last);
            (obj, None, cert)
        }
        Ok(Trace::Fb(t)) => {
            let cert = solver.enforced().then(|| fb_checks(&t, cfg.iters));
            (t.objectives, None, cert)
        }
        Err(e) => {
            let why = e.to_string();
            let cert = solver.enforced().then(|| CheckTally::all_failed(cfg.iters, &why));
            (Vec::new(), Some(why), cert)
        }
    };
    Ok(RunRecord {
        solver,
        objectives,
        diverged,
        certificate,
        wall,
    })
}

fn run_problem(cfg: &ExperimentConfig, ops: &Operators, nets: &LearnedNets, seed: u64) -> Result<ProblemRecord> {
    let inst = make_problem_with(cfg, ops, seed)?;
    let runs = cfg
        .solvers
        .iter()
        .map(|&s| run_one(cfg, nets, s, &inst))
        .collect::<Result<Vec<_>>>()?;
    let reference = reference_optimum(cfg, &inst.problem, &inst.x0, cfg.reference_budget)?;
    let mut fstar = reference;
    let mut fstar_source = format!(
        "{} x{}",
        if cfg.is_smooth() { "nesterov" } else { "fista" },
        cfg.reference_budget
    );
    for r in &runs {
        if let Some(m) = r.objectives.iter().copied().reduce(f64::min) {
            if m < fstar {
                fstar = m;
                fstar_source = r.solver.name().to_string();
            }
        }
    }
    Ok(ProblemRecord {
        seed,
        reference,
        fstar,
        fstar_source,
        runs,
    })
}

/// Applies `f` to `0..len` on a small worker pool; results keep index order.
pub fn parallel_map<T: Send>(len: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(len.max(1));
    if workers <= 1 {
        return (0..len).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..len).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= len {
                    break;
                }
                let v = f(i);
                slots.lock().expect("no worker panicked")[i] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|v| v.expect("every index visited"))
        .collect()
}

/// Every configured solver on every held-out problem. Divergence is recorded
/// per run; configuration and construction errors abort.
pub fn run_experiment(cfg: &ExperimentConfig, nets: &LearnedNets) -> Result<ExperimentResult> {
    cfg.validate()?;
    let ops = Operators::build(cfg)?;
    run_experiment_with(cfg, &ops, nets)
}

pub fn run_experiment_with(cfg: &ExperimentConfig, ops: &Operators, nets: &LearnedNets) -> Result<ExperimentResult> {
    let seeds = test_seeds(cfg.seed, cfg.test_problems);
    let problems = parallel_map(seeds.len(), |i| run_problem(cfg, ops, nets, seeds[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        problems,
    })
}
