//! Forward-backward splitting with two learned deviations:
//!
//! ```text
//! w_n     = x_n + dx1_n
//! x_{n+1} = prox_{gamma_n g}(x_n - gamma_n grad f(w_n) + (gamma_n / beta) dx1_n + dx2_n)
//! ```
//!
//! Each step is certified by a bound on the deviations in terms of the
//! previous iterates, which makes a Lyapunov sequence non-increasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learned::normalize::{normalize_fb_first, normalize_fb_second};
use crate::objectives::CompositeProblem;
use crate::smooth::{finite_objective, next_t};
use crate::tensor::{randn, Tensor};
use crate::within_bound;

/// Iteration state entering step `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FbState {
    pub n: usize,
    pub x: Tensor,
    pub x_prev: Tensor,
    pub w_prev: Tensor,
    /// `grad f(w_{n-1})`.
    pub grad_w_prev: Tensor,
    pub dev1_prev: Tensor,
    pub dev2_prev: Tensor,
    /// Step size used by the previous step.
    pub gamma_prev: f64,
}

impl FbState {
    /// State at `n = 0`. The history fields are zero or copies of `x0`; they
    /// are never used by the certificate, which starts at `n = 1`.
    pub fn initial(x0: &Tensor, gamma0: f64) -> Self {
        let z = Tensor::zeros_like(x0);
        Self {
            n: 0,
            x: x0.clone(),
            x_prev: x0.clone(),
            w_prev: x0.clone(),
            grad_w_prev: z.clone(),
            dev1_prev: z.clone(),
            dev2_prev: z,
            gamma_prev: gamma0,
        }
    }

    /// `|x_n - x_{n-1} - beta / (2 beta - gamma_{n-1}) dx2_{n-1}|`.
    pub fn first_radius(&self, beta: f64) -> f64 {
        let c = beta / (2.0 * beta - self.gamma_prev);
        self.x
            .sub(&self.x_prev)
            .add_scaled(-c, &self.dev2_prev)
            .norm()
    }

    /// `|grad f(w_n) - grad f(w_{n-1}) - (x_n - w_{n-1}) / beta|`.
    pub fn second_radius(&self, grad_w: &Tensor, beta: f64) -> f64 {
        grad_w
            .sub(&self.grad_w_prev)
            .add_scaled(-1.0 / beta, &self.x.sub(&self.w_prev))
            .norm()
    }
}

/// `|dx1|^2 / (2 beta) + beta / (2 gamma (2 beta - gamma)) |dx2|^2`.
pub fn feasibility_lhs(dev1: &Tensor, dev2: &Tensor, beta: f64, gamma: f64) -> f64 {
    dev1.norm_sq() / (2.0 * beta) + beta / (2.0 * gamma * (2.0 * beta - gamma)) * dev2.norm_sq()
}

/// Right-hand side of the deviation bound at step `n >= 1`, where `grad_w` is
/// `grad f(w_n)` for the candidate `dx1_n`.
pub fn feasibility_rhs(
    state: &FbState,
    grad_w: &Tensor,
    beta: f64,
    kappa_a: f64,
    kappa_b: f64,
) -> Result<f64> {
    if state.n == 0 {
        return Err(Error::NoHistory);
    }
    let gp = state.gamma_prev;
    let r1 = state.first_radius(beta);
    let r2 = state.second_radius(grad_w, beta);
    Ok(kappa_a * (2.0 * beta - gp) / (2.0 * beta * gp) * r1 * r1 + beta * kappa_b / 2.0 * r2 * r2)
}

/// Applies one step with the given deviations and returns the state entering
/// step `n + 1`.
pub fn fb_step(
    state: &FbState,
    dev1: &Tensor,
    dev2: &Tensor,
    problem: &CompositeProblem,
    gamma: f64,
) -> Result<FbState> {
    let beta = problem.f.beta();
    if !(gamma > 0.0 && gamma < 2.0 * beta) {
        return Err(Error::InvalidParameter(format!(
            "step {gamma} outside (0, 2 beta) = (0, {})",
            2.0 * beta
        )));
    }
    let w = state.x.add(dev1);
    let grad_w = problem.f.gradient(&w);
    step_with(state, dev1, dev2, w, grad_w, problem, beta, gamma)
}

#[allow(clippy::too_many_arguments)]
fn step_with(
    state: &FbState,
    dev1: &Tensor,
    dev2: &Tensor,
    w: Tensor,
    grad_w: Tensor,
    problem: &CompositeProblem,
    beta: f64,
    gamma: f64,
) -> Result<FbState> {
    let arg = state
        .x
        .add_scaled(-gamma, &grad_w)
        .add_scaled(gamma / beta, dev1)
        .add(dev2);
    let next = problem.g.prox(&arg, gamma);
    if !next.is_finite() {
        return Err(Error::Diverged {
            iteration: state.n,
            what: "iterate".into(),
        });
    }
    Ok(FbState {
        n: state.n + 1,
        x: next,
        x_prev: state.x.clone(),
        w_prev: w,
        grad_w_prev: grad_w,
        dev1_prev: dev1.clone(),
        dev2_prev: dev2.clone(),
        gamma_prev: gamma,
    })
}

/// `(V_n, combined)` for the step that produced `state` (so `state.x` is
/// `x_{n+1}` and the `_prev` fields describe step `n`).
///
/// `V_n = f(w_n) + g(x_{n+1}) + <grad f(w_n), x_{n+1} - w_n> + |x_{n+1} - w_n|^2 / (2 beta)`
/// and `combined = V_n + (2 beta - gamma) / (2 beta gamma) |x_{n+1} - x_n - beta/(2 beta - gamma) dx2_n|^2`.
pub fn lyapunov_value(state: &FbState, problem: &CompositeProblem) -> (f64, f64) {
    let beta = problem.f.beta();
    let gamma = state.gamma_prev;
    let d = state.x.sub(&state.w_prev);
    let v = problem.f.value(&state.w_prev)
        + problem.g.value(&state.x)
        + state.grad_w_prev.dot(&d)
        + d.norm_sq() / (2.0 * beta);
    let r = state.first_radius(beta);
    (v, v + (2.0 * beta - gamma) / (2.0 * beta * gamma) * r * r)
}

/// Step sizes `gamma_n`.
#[derive(Clone, Debug, PartialEq)]
pub enum GammaSchedule {
    Constant(f64),
    /// Explicit values; the last one repeats.
    Sequence(Vec<f64>),
}

impl GammaSchedule {
    pub fn get(&self, n: usize) -> f64 {
        match self {
            GammaSchedule::Constant(g) => *g,
            GammaSchedule::Sequence(s) => *s.get(n).or(s.last()).expect("empty step schedule"),
        }
    }

    fn validate(&self, beta: f64, iters: usize) -> Result<()> {
        if let GammaSchedule::Sequence(s) = self {
            if s.is_empty() {
                return Err(Error::InvalidParameter("empty step schedule".into()));
            }
        }
        for n in 0..iters.min(self.len_hint()) {
            let g = self.get(n);
            if !(g > 0.0 && g < 2.0 * beta) {
                return Err(Error::InvalidParameter(format!(
                    "step {g} at n = {n} outside (0, 2 beta) = (0, {})",
                    2.0 * beta
                )));
            }
        }
        Ok(())
    }

    fn len_hint(&self) -> usize {
        match self {
            GammaSchedule::Constant(_) => 1,
            GammaSchedule::Sequence(s) => s.len(),
        }
    }
}

/// What the rule sees at step `n >= 1`.
#[derive(Debug)]
pub struct FbContext<'a> {
    pub state: &'a FbState,
    pub problem: &'a CompositeProblem,
    pub beta: f64,
    pub gamma: f64,
}

/// Selects the two deviations. `propose_second` runs after `w_n` and
/// `grad f(w_n)` have been formed from the first deviation.
pub trait FbRule {
    /// Bound weights `(kappa_a, kappa_b)`.
    fn kappas(&self) -> (f64, f64);
    fn propose_first(&mut self, ctx: &FbContext<'_>) -> Result<Tensor>;
    fn propose_second(&mut self, ctx: &FbContext<'_>, dev1: &Tensor, grad_w: &Tensor) -> Result<Tensor>;
    /// Called at step 0, where both deviations are forced to zero.
    fn skip_step(&mut self) {}
}

/// No deviations: the run is plain forward-backward splitting.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFbRule;

impl FbRule for ZeroFbRule {
    fn kappas(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn propose_first(&mut self, ctx: &FbContext<'_>) -> Result<Tensor> {
        Ok(Tensor::zeros_like(&ctx.state.x))
    }
    fn propose_second(&mut self, ctx: &FbContext<'_>, _: &Tensor, _: &Tensor) -> Result<Tensor> {
        Ok(Tensor::zeros_like(&ctx.state.x))
    }
}

/// Random proposals passed through the safeguard layers, so every pair is
/// feasible by construction.
#[derive(Clone, Debug)]
pub struct RandomFeasibleFbRule {
    kappa: (f64, f64),
    spread: f64,
    rng: ChaCha8Rng,
}

impl RandomFeasibleFbRule {
    pub fn new(kappa_a: f64, kappa_b: f64, seed: u64) -> Self {
        Self {
            kappa: (kappa_a, kappa_b),
            spread: 3.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Gaussian direction with log-uniform length in `[e^-spread, e^spread]`.
    fn raw(&mut self, like: &Tensor) -> Tensor {
        let d = randn(like.shape(), &mut self.rng);
        let len = (self.rng.random_range(-self.spread..self.spread)).exp();
        let n = d.norm();
        if n == 0.0 {
            d
        } else {
            d.scale(len / n)
        }
    }
}

impl FbRule for RandomFeasibleFbRule {
    fn kappas(&self) -> (f64, f64) {
        self.kappa
    }
    fn propose_first(&mut self, ctx: &FbContext<'_>) -> Result<Tensor> {
        let h = self.raw(&ctx.state.x);
        Ok(normalize_fb_first(&h, ctx.state, ctx.beta, self.kappa.0))
    }
    fn propose_second(&mut self, ctx: &FbContext<'_>, _: &Tensor, grad_w: &Tensor) -> Result<Tensor> {
        let h = self.raw(&ctx.state.x);
        Ok(normalize_fb_second(&h, ctx.state, grad_w, ctx.beta, ctx.gamma, self.kappa.1))
    }
}

/// Unconstrained random proposals of norm `scale * |x_n - x_{n-1}|`, which
/// often violate the bound; used to exercise the enforcer.
#[derive(Clone, Debug)]
pub struct RandomFbRule {
    kappa: (f64, f64),
    scale: f64,
    rng: ChaCha8Rng,
}

impl RandomFbRule {
    pub fn new(kappa_a: f64, kappa_b: f64, scale: f64, seed: u64) -> Self {
        Self {
            kappa: (kappa_a, kappa_b),
            scale,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn raw(&mut self, state: &FbState) -> Tensor {
        let d = randn(state.x.shape(), &mut self.rng);
        let step = state.x.sub(&state.x_prev).norm();
        let n = d.norm();
        if n == 0.0 {
            d
        } else {
            d.scale(self.scale * step / n)
        }
    }
}

impl FbRule for RandomFbRule {
    fn kappas(&self) -> (f64, f64) {
        self.kappa
    }
    fn propose_first(&mut self, ctx: &FbContext<'_>) -> Result<Tensor> {
        Ok(self.raw(ctx.state))
    }
    fn propose_second(&mut self, ctx: &FbContext<'_>, _: &Tensor, _: &Tensor) -> Result<Tensor> {
        Ok(self.raw(ctx.state))
    }
}

/// FISTA written as deviations: `dx1_n = ((t_n - 1) / t_{n+1}) (x_n - x_{n-1})`
/// and `dx2_n = ((beta - gamma_n) / beta) dx1_n`, with `t_0 = 1`.
///
/// The pair need not satisfy the deviation bound, so runs with this rule
/// should not enforce it.
#[derive(Clone, Debug)]
pub struct FistaRule {
    t: f64,
}

impl FistaRule {
    pub fn new() -> Self {
        Self { t: 1.0 }
    }

    /// Deviations for the given state; advances the momentum sequence.
    pub fn deviations(&mut self, state: &FbState, beta: f64, gamma: f64) -> (Tensor, Tensor) {
        let t_next = next_t(self.t);
        let c = (self.t - 1.0) / t_next;
        self.t = t_next;
        let d1 = state.x.sub(&state.x_prev).scale(c);
        let d2 = d1.scale((beta - gamma) / beta);
        (d1, d2)
    }
}

impl Default for FistaRule {
    fn default() -> Self {
        Self::new()
    }
}

impl FbRule for FistaRule {
    fn kappas(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn propose_first(&mut self, ctx: &FbContext<'_>) -> Result<Tensor> {
        Ok(self.deviations(ctx.state, ctx.beta, ctx.gamma).0)
    }
    fn propose_second(&mut self, ctx: &FbContext<'_>, dev1: &Tensor, _: &Tensor) -> Result<Tensor> {
        Ok(dev1.scale((ctx.beta - ctx.gamma) / ctx.beta))
    }
    fn skip_step(&mut self) {
        self.t = next_t(self.t);
    }
}

#[derive(Clone, Debug)]
pub struct FbOptions {
    pub iters: usize,
    pub enforce: bool,
    pub keep_iterates: bool,
}

impl FbOptions {
    pub fn new(iters: usize) -> Self {
        Self {
            iters,
            enforce: true,
            keep_iterates: false,
        }
    }
}

/// Per-step record; `objective` is `F(x_n)`, `lyapunov`/`combined` are
/// `V_n` and its augmented form after the step.
#[derive(Clone, Debug, PartialEq)]
pub struct FbRecord {
    pub n: usize,
    pub gamma: f64,
    pub objective: f64,
    pub lyapunov: f64,
    pub combined: f64,
    /// Bound sides for the raw proposal (zero at `n = 0`).
    pub lhs: f64,
    pub rhs: f64,
    /// Bound sides for the pair actually applied.
    pub accepted_lhs: f64,
    pub accepted_rhs: f64,
    pub feasible: bool,
    pub enforced: bool,
    pub dev1_norm: f64,
    pub dev2_norm: f64,
    pub step_norm: f64,
}

#[derive(Clone, Debug)]
pub struct FbTrace {
    pub beta: f64,
    pub kappas: (f64, f64),
    /// `F(x_0), ..., F(x_steps)`.
    pub objectives: Vec<f64>,
    pub records: Vec<FbRecord>,
    pub iterates: Option<Vec<Tensor>>,
    pub x_final: Tensor,
    /// False for baselines (FISTA) whose deviations are not certified.
    pub certified: bool,
}

impl FbTrace {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("objectives never empty")
    }

    pub fn all_feasible(&self) -> bool {
        self.records.iter().all(|r| r.feasible)
    }

    /// `combined_{n+1} <= combined_n + rel |combined_n|` for all steps.
    pub fn lyapunov_monotone(&self, rel: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].combined <= w[0].combined + rel * w[0].combined.abs())
    }

    /// `V_n >= F(x_{n+1}) - tol` for all steps.
    pub fn lyapunov_dominates(&self, tol: f64) -> bool {
        self.records
            .iter()
            .zip(&self.objectives[1..])
            .all(|(r, &f)| r.lyapunov >= f - tol)
    }
}

/// Maximum number of shrink rounds before the enforcer falls back to zero
/// deviations.
const ENFORCE_ROUNDS: usize = 60;

struct Accepted {
    dev1: Tensor,
    dev2: Tensor,
    w: Tensor,
    grad_w: Tensor,
    lhs: f64,
    rhs: f64,
}

/// Shrinks the raw pair jointly until the bound holds. Since the bound's
/// right side depends on `dx1` through `grad f(w_n)`, the factor
/// `sqrt(rhs / lhs)` is recomputed after each shrink; zero deviations are
/// always feasible and end the search.
#[allow(clippy::too_many_arguments)]
fn enforce_joint(
    state: &FbState,
    raw1: &Tensor,
    raw2: &Tensor,
    lhs: f64,
    rhs: f64,
    problem: &CompositeProblem,
    kappa: (f64, f64),
    beta: f64,
    gamma: f64,
) -> Result<Accepted> {
    let mut s = 1.0;
    let (mut l, mut r) = (lhs, rhs);
    for _ in 0..ENFORCE_ROUNDS {
        if r <= 0.0 {
            break;
        }
        s *= (r / l).sqrt();
        let dev1 = raw1.scale(s);
        let dev2 = raw2.scale(s);
        let w = state.x.add(&dev1);
        let grad_w = problem.f.gradient(&w);
        l = feasibility_lhs(&dev1, &dev2, beta, gamma);
        r = feasibility_rhs(state, &grad_w, beta, kappa.0, kappa.1)?;
        if l <= r {
            return Ok(Accepted {
                dev1,
                dev2,
                w,
                grad_w,
                lhs: l,
                rhs: r,
            });
        }
        // land just inside next time
        s *= 1.0 - 1e-12;
    }
    let dev1 = Tensor::zeros_like(raw1);
    let dev2 = Tensor::zeros_like(raw2);
    let w = state.x.clone();
    let grad_w = problem.f.gradient(&w);
    let rhs = feasibility_rhs(state, &grad_w, beta, kappa.0, kappa.1)?;
    Ok(Accepted {
        dev1,
        dev2,
        w,
        grad_w,
        lhs: 0.0,
        rhs,
    })
}

fn check_start(problem: &CompositeProblem, x0: &Tensor, iters: usize) -> Result<()> {
    if x0.shape() != problem.shape() {
        return Err(Error::ShapeMismatch {
            expected: problem.shape().to_vec(),
            got: x0.shape().to_vec(),
        });
    }
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    Ok(())
}

fn check_finite(t: &Tensor, iteration: usize, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            iteration,
            what: what.to_string(),
        })
    }
}

/// Runs the deviation scheme. Step 0 always uses zero deviations since the
/// bound needs one step of history.
pub fn run_fb(
    problem: &CompositeProblem,
    rule: &mut dyn FbRule,
    x0: &Tensor,
    gammas: &GammaSchedule,
    opts: &FbOptions,
) -> Result<FbTrace> {
    check_start(problem, x0, opts.iters)?;
    let beta = problem.f.beta();
    gammas.validate(beta, opts.iters)?;
    let kappa = rule.kappas();
    for k in [kappa.0, kappa.1] {
        if !(0.0..1.0).contains(&k) {
            return Err(Error::InvalidParameter(format!("kappa {k} outside [0, 1)")));
        }
    }

    let mut state = FbState::initial(x0, gammas.get(0));
    let mut objectives = vec![problem.objective(x0)];
    let mut records = Vec::with_capacity(opts.iters);
    let mut iterates = opts.keep_iterates.then(|| vec![x0.clone()]);

    for n in 0..opts.iters {
        let gamma = gammas.get(n);
        let (dev1, dev2, w, grad_w, lhs, rhs, acc_lhs, acc_rhs, feasible, enforced);
        if n == 0 {
            rule.skip_step();
            dev1 = Tensor::zeros_like(x0);
            dev2 = Tensor::zeros_like(x0);
            w = state.x.clone();
            grad_w = problem.f.gradient(&w);
            (lhs, rhs, acc_lhs, acc_rhs) = (0.0, 0.0, 0.0, 0.0);
            feasible = true;
            enforced = false;
        } else {
            let ctx = FbContext {
                state: &state,
                problem,
                beta,
                gamma,
            };
            let raw1 = rule.propose_first(&ctx)?;
            check_finite(&raw1, n, "first deviation")?;
            let raw_w = state.x.add(&raw1);
            let raw_grad = problem.f.gradient(&raw_w);
            let raw2 = rule.propose_second(&ctx, &raw1, &raw_grad)?;
            check_finite(&raw2, n, "second deviation")?;
            lhs = feasibility_lhs(&raw1, &raw2, beta, gamma);
            rhs = feasibility_rhs(&state, &raw_grad, beta, kappa.0, kappa.1)?;
            feasible = within_bound(lhs, rhs);
            enforced = opts.enforce && !feasible;
            if enforced {
                let acc = enforce_joint(&state, &raw1, &raw2, lhs, rhs, problem, kappa, beta, gamma)?;
                dev1 = acc.dev1;
                dev2 = acc.dev2;
                w = acc.w;
                grad_w = acc.grad_w;
                acc_lhs = acc.lhs;
                acc_rhs = acc.rhs;
            } else {
                dev1 = raw1;
                dev2 = raw2;
                w = raw_w;
                grad_w = raw_grad;
                acc_lhs = lhs;
                acc_rhs = rhs;
            }
        }
        let (d1n, d2n) = (dev1.norm(), dev2.norm());
        let next = step_with(&state, &dev1, &dev2, w, grad_w, problem, beta, gamma)?;
        let (lyapunov, combined) = lyapunov_value(&next, problem);
        records.push(FbRecord {
            n,
            gamma,
            objective: *objectives.last().unwrap(),
            lyapunov,
            combined,
            lhs,
            rhs,
            accepted_lhs: acc_lhs,
            accepted_rhs: acc_rhs,
            feasible,
            enforced,
            dev1_norm: d1n,
            dev2_norm: d2n,
            step_norm: next.x.sub(&next.x_prev).norm(),
        });
        state = next;
        objectives.push(finite_objective(problem, &state.x, n)?);
        if let Some(it) = iterates.as_mut() {
            it.push(state.x.clone());
        }
    }
    Ok(FbTrace {
        beta,
        kappas: kappa,
        objectives,
        records,
        iterates,
        x_final: state.x,
        certified: true,
    })
}

/// Plain forward-backward splitting, `x_{n+1} = prox_{gamma g}(x_n - gamma grad f(x_n))`.
pub fn baseline_ista(
    problem: &CompositeProblem,
    x0: &Tensor,
    gammas: &GammaSchedule,
    iters: usize,
) -> Result<FbTrace> {
    accelerated(problem, x0, gammas, iters, false, false)
}

/// FISTA with `t_0 = 1`: `w_n = x_n + ((t_n - 1) / t_{n+1}) (x_n - x_{n-1})`
/// followed by a forward-backward step from `w_n`. The first step has zero
/// momentum.
pub fn baseline_fista(
    problem: &CompositeProblem,
    x0: &Tensor,
    gammas: &GammaSchedule,
    iters: usize,
) -> Result<FbTrace> {
    accelerated(problem, x0, gammas, iters, true, false)
}

/// Shared loop for the two baselines. Records carry `V_n` for the point the
/// gradient was taken at; bound columns are zero.
pub fn accelerated(
    problem: &CompositeProblem,
    x0: &Tensor,
    gammas: &GammaSchedule,
    iters: usize,
    momentum: bool,
    keep_iterates: bool,
) -> Result<FbTrace> {
    check_start(problem, x0, iters)?;
    let beta = problem.f.beta();
    gammas.validate(beta, iters)?;
    let mut t = 1.0;
    let mut x_prev = x0.clone();
    let mut x = x0.clone();
    let mut objectives = vec![problem.objective(x0)];
    let mut records = Vec::with_capacity(iters);
    let mut iterates = keep_iterates.then(|| vec![x0.clone()]);
    for n in 0..iters {
        let gamma = gammas.get(n);
        let w = if momentum {
            let t_next = next_t(t);
            let c = (t - 1.0) / t_next;
            t = t_next;
            x.add_scaled(c, &x.sub(&x_prev))
        } else {
            x.clone()
        };
        let grad_w = problem.f.gradient(&w);
        let next = problem.g.prox(&w.add_scaled(-gamma, &grad_w), gamma);
        check_finite(&next, n, "iterate")?;
        let d = next.sub(&w);
        let lyapunov = problem.f.value(&w)
            + problem.g.value(&next)
            + grad_w.dot(&d)
            + d.norm_sq() / (2.0 * beta);
        let dev1 = w.sub(&x);
        let step_norm = next.sub(&x).norm();
        let dev2 = dev1.scale((beta - gamma) / beta);
        let r = next
            .sub(&x)
            .add_scaled(-beta / (2.0 * beta - gamma), &dev2)
            .norm();
        records.push(FbRecord {
            n,
            gamma,
            objective: *objectives.last().unwrap(),
            lyapunov,
            combined: lyapunov + (2.0 * beta - gamma) / (2.0 * beta * gamma) * r * r,
            lhs: 0.0,
            rhs: 0.0,
            accepted_lhs: 0.0,
            accepted_rhs: 0.0,
            feasible: true,
            enforced: false,
            dev1_norm: dev1.norm(),
            dev2_norm: dev2.norm(),
            step_norm,
        });
        x_prev = std::mem::replace(&mut x, next);
        objectives.push(finite_objective(problem, &x, n)?);
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }
    }
    Ok(FbTrace {
        beta,
        kappas: (0.0, 0.0),
        objectives,
        records,
        iterates,
        x_final: x,
        certified: !momentum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{Identity, SharedMap};
    use crate::objectives::{weighted_least_squares, ProxFn};
    use std::sync::Arc;

    fn v(d: &[f64]) -> Tensor {
        Tensor::vector(d.to_vec()).unwrap()
    }

    /// `x^2 / 2 + lambda |x|`, beta = 1.
    fn scalar_problem(lambda: f64) -> CompositeProblem {
        let a: SharedMap = Arc::new(Identity::new(&[1]).unwrap());
        let f = weighted_least_squares(a, v(&[0.0]), 0.5).unwrap();
        CompositeProblem::forward_backward(f, ProxFn::l1(&[1], lambda).unwrap(), v(&[0.0])).unwrap()
    }

    #[test]
    fn lhs_examples() {
        let (z, o) = (v(&[0.0]), v(&[1.0]));
        assert_eq!(feasibility_lhs(&z, &z, 0.5, 0.5), 0.0);
        assert_eq!(feasibility_lhs(&o, &z, 0.5, 0.5), 1.0);
        assert_eq!(feasibility_lhs(&z, &o, 0.5, 0.5), 1.0);
    }

    #[test]
    fn scalar_step_example() {
        let p = scalar_problem(1.0);
        let s = FbState::initial(&v(&[3.0]), 1.0);
        let z = v(&[0.0]);
        let next = fb_step(&s, &z, &z, &p, 1.0).unwrap();
        assert_eq!(next.x.data(), &[0.0]);
    }

    #[test]
    fn rhs_needs_history() {
        let s = FbState::initial(&v(&[3.0]), 1.0);
        assert!(matches!(
            feasibility_rhs(&s, &v(&[0.0]), 1.0, 0.5, 0.5),
            Err(Error::NoHistory)
        ));
    }

    #[test]
    fn rejects_bad_step() {
        let p = scalar_problem(1.0);
        let s = FbState::initial(&v(&[3.0]), 1.0);
        let z = v(&[0.0]);
        assert!(fb_step(&s, &z, &z, &p, 2.0).is_err());
        assert!(run_fb(&p, &mut ZeroFbRule, &v(&[1.0]), &GammaSchedule::Constant(0.0), &FbOptions::new(2)).is_err());
    }

    #[test]
    fn fista_first_deviation_is_zero() {
        let mut r = FistaRule::new();
        let mut s = FbState::initial(&v(&[1.0, 2.0]), 0.5);
        s.x_prev = v(&[0.0, 0.0]);
        let (d1, d2) = r.deviations(&s, 0.5, 0.5);
        assert_eq!(d1.norm(), 0.0);
        assert_eq!(d2.norm(), 0.0);
        let (d1, d2) = r.deviations(&s, 0.5, 0.5);
        assert!(d1.norm() > 0.0);
        assert_eq!(d2.norm(), 0.0);
    }
}
