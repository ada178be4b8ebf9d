//! Gradient descent with learned deviations, `x_{n+1} = x_n - beta (grad F(x_n) + dx_n)`,
//! certified step by step through `|dx_n| <= eps_n |grad F(x_n)|`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objectives::CompositeProblem;
use crate::tensor::{randn, Tensor};
use crate::within_bound;

/// What a rule sees at iteration `n`.
#[derive(Debug)]
pub struct SmoothRuleInput<'a> {
    pub n: usize,
    pub x: &'a Tensor,
    pub grad_f: &'a Tensor,
    /// Gradient of the smooth regularizer, when the problem has one.
    pub grad_g: Option<&'a Tensor>,
    /// Full gradient `grad f + grad g`.
    pub grad: &'a Tensor,
    /// Previous accepted deviation (zero at `n = 0`).
    pub prev_dev: &'a Tensor,
}

/// Selects the deviation `dx_n`. `eps(n)` is the radius of the feasible ball
/// relative to `|grad F(x_n)|`.
pub trait SmoothRule {
    fn eps(&self, n: usize) -> f64;
    fn propose(&mut self, input: &SmoothRuleInput<'_>) -> Result<Tensor>;
}

/// Always proposes zero: plain gradient descent.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroRule;

impl SmoothRule for ZeroRule {
    fn eps(&self, _n: usize) -> f64 {
        0.0
    }
    fn propose(&mut self, input: &SmoothRuleInput<'_>) -> Result<Tensor> {
        Ok(Tensor::zeros_like(input.x))
    }
}

/// Random direction of random length strictly inside the feasible ball.
#[derive(Clone, Debug)]
pub struct RandomFeasibleRule {
    eps: f64,
    rng: ChaCha8Rng,
}

impl RandomFeasibleRule {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self {
            eps,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SmoothRule for RandomFeasibleRule {
    fn eps(&self, _n: usize) -> f64 {
        self.eps
    }
    fn propose(&mut self, input: &SmoothRuleInput<'_>) -> Result<Tensor> {
        use rand::Rng;
        let dir = randn(input.x.shape(), &mut self.rng);
        let frac: f64 = self.rng.random();
        let n = dir.norm();
        if n == 0.0 {
            return Ok(Tensor::zeros_like(input.x));
        }
        Ok(dir.scale(frac * self.eps * input.grad.norm() / n))
    }
}

/// Random proposals of size `scale * |grad F|`, ignoring the feasible ball.
/// With `scale > eps` most proposals are infeasible; used to exercise the
/// enforcer.
#[derive(Clone, Debug)]
pub struct RandomRule {
    eps: f64,
    scale: f64,
    rng: ChaCha8Rng,
}

impl RandomRule {
    pub fn new(eps: f64, scale: f64, seed: u64) -> Self {
        Self {
            eps,
            scale,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SmoothRule for RandomRule {
    fn eps(&self, _n: usize) -> f64 {
        self.eps
    }
    fn propose(&mut self, input: &SmoothRuleInput<'_>) -> Result<Tensor> {
        let dir = randn(input.x.shape(), &mut self.rng);
        let n = dir.norm();
        if n == 0.0 {
            return Ok(Tensor::zeros_like(input.x));
        }
        Ok(dir.scale(self.scale * input.grad.norm() / n))
    }
}

/// `x - beta (grad + dev)`.
pub fn smooth_step(x: &Tensor, grad: &Tensor, beta: f64, dev: &Tensor) -> Tensor {
    assert!(beta > 0.0, "smooth_step: beta must be positive");
    assert!(x.same_shape(grad) && x.same_shape(dev), "smooth_step: shape mismatch");
    let mut out = x.clone();
    for ((o, &g), &d) in out.data_mut().iter_mut().zip(grad.data()).zip(dev.data()) {
        *o -= beta * (g + d);
    }
    out
}

/// One contraction factor of the rate bound, `1 - (1 - eps^2) / (k + 2)`.
pub fn rate_step_factor(eps: f64, k: usize) -> f64 {
    1.0 - (1.0 - eps * eps) / (k as f64 + 2.0)
}

/// `prod_{k < n} (1 - (1 - eps_k^2) / (k + 2))` for `n = eps.len()`.
pub fn rate_factor(eps: &[f64]) -> f64 {
    eps.iter()
        .enumerate()
        .map(|(k, &e)| rate_step_factor(e, k))
        .product()
}

/// Upper bound on `F(x_n) - F(x*)` after `n = eps.len()` steps, given
/// `dist0 = |x_0 - x*|`.
pub fn rate_bound(eps: &[f64], beta: f64, dist0: f64) -> f64 {
    rate_factor(eps) * dist0 * dist0 / (2.0 * beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The gradient vanished; the feasible set collapsed to zero and the run
    /// stopped early.
    Stationary,
}

#[derive(Clone, Debug)]
pub struct SmoothOptions {
    pub iters: usize,
    pub enforce: bool,
    /// Minimizer estimate; enables the rate bound column.
    pub minimizer: Option<Tensor>,
    pub keep_iterates: bool,
}

impl SmoothOptions {
    pub fn new(iters: usize) -> Self {
        Self {
            iters,
            enforce: true,
            minimizer: None,
            keep_iterates: false,
        }
    }
}

/// Per-step record. `objective` and `grad_norm` refer to `x_n`, the point the
/// step starts from.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothRecord {
    pub n: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub eps: f64,
    pub raw_dev_norm: f64,
    pub dev_norm: f64,
    /// Whether the raw proposal satisfied the certificate.
    pub feasible: bool,
    pub enforced: bool,
}

#[derive(Clone, Debug)]
pub struct SmoothTrace {
    pub beta: f64,
    /// `F(x_0), ..., F(x_steps)`.
    pub objectives: Vec<f64>,
    pub records: Vec<SmoothRecord>,
    /// Product factor of the rate bound after each step count, starting at 1.
    pub rate_factors: Vec<f64>,
    /// `rate_factors * |x_0 - x*|^2 / (2 beta)` when a minimizer was supplied.
    pub rate_bounds: Option<Vec<f64>>,
    pub iterates: Option<Vec<Tensor>>,
    pub x_final: Tensor,
    pub status: RunStatus,
    /// False for baselines whose steps are not deviations of the certified form.
    pub certified: bool,
}

impl SmoothTrace {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn all_feasible(&self) -> bool {
        self.records.iter().all(|r| r.feasible)
    }

    /// `F(x_{n+1}) <= F(x_n) + slack` for every step.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.objectives.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("objectives never empty")
    }
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

/// `F(x)`, or a divergence error when it overflowed.
pub(crate) fn finite_objective(problem: &CompositeProblem, x: &Tensor, iteration: usize) -> Result<f64> {
    let v = problem.objective(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Diverged {
            iteration,
            what: "objective".to_string(),
        })
    }
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

/// Runs the deviation scheme. With `enforce`, infeasible proposals are pulled
/// radially onto the boundary of the ball `eps_n |grad F(x_n)|`.
pub fn run_smooth(
    problem: &CompositeProblem,
    rule: &mut dyn SmoothRule,
    x0: &Tensor,
    opts: &SmoothOptions,
) -> Result<SmoothTrace> {
    if !problem.is_smooth() {
        return Err(Error::InvalidParameter(
            "the gradient scheme needs a fully smooth problem".into(),
        ));
    }
    check_start(problem, x0, opts.iters)?;
    let f = problem.smooth_part();
    let beta = f.beta();

    let mut x = x0.clone();
    let mut prev_dev = Tensor::zeros_like(x0);
    let mut objectives = vec![problem.objective(&x)];
    let mut records = Vec::with_capacity(opts.iters);
    let mut rate_factors = vec![1.0];
    let mut iterates = opts.keep_iterates.then(|| vec![x.clone()]);
    let mut status = RunStatus::Completed;

    for n in 0..opts.iters {
        let grad_f = problem.f.gradient(&x);
        let grad_g = problem.smooth_g.as_ref().map(|g| g.gradient(&x));
        let grad = match &grad_g {
            Some(gg) => grad_f.add(gg),
            None => grad_f.clone(),
        };
        let grad_norm = grad.norm();
        if grad_norm == 0.0 {
            status = RunStatus::Stationary;
            break;
        }
        let eps = rule.eps(n);
        let raw = rule.propose(&SmoothRuleInput {
            n,
            x: &x,
            grad_f: &grad_f,
            grad_g: grad_g.as_ref(),
            grad: &grad,
            prev_dev: &prev_dev,
        })?;
        if !raw.same_shape(&x) {
            return Err(Error::ShapeMismatch {
                expected: x.shape().to_vec(),
                got: raw.shape().to_vec(),
            });
        }
        check_finite(&raw, n, "proposed deviation")?;
        let radius = eps * grad_norm;
        let raw_norm = raw.norm();
        let feasible = within_bound(raw_norm, radius);
        let enforced = opts.enforce && !feasible;
        let dev = if enforced {
            raw.scale(radius / raw_norm)
        } else {
            raw.clone()
        };

        let next = smooth_step(&x, &grad, beta, &dev);
        check_finite(&next, n, "iterate")?;
        records.push(SmoothRecord {
            n,
            objective: *objectives.last().unwrap(),
            grad_norm,
            eps,
            raw_dev_norm: raw_norm,
            dev_norm: dev.norm(),
            feasible,
            enforced,
        });
        rate_factors.push(rate_factors[n] * rate_step_factor(eps, n));
        x = next;
        prev_dev = dev;
        objectives.push(finite_objective(problem, &x, n)?);
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }
    }

    let rate_bounds = opts.minimizer.as_ref().map(|xs| {
        let d2 = x0.sub(xs).norm_sq();
        rate_factors.iter().map(|r| r * d2 / (2.0 * beta)).collect()
    });
    Ok(SmoothTrace {
        beta,
        objectives,
        records,
        rate_factors,
        rate_bounds,
        iterates,
        x_final: x,
        status,
        certified: true,
    })
}

/// Gradient descent with step `beta`.
pub fn baseline_gd(problem: &CompositeProblem, x0: &Tensor, iters: usize) -> Result<SmoothTrace> {
    let mut opts = SmoothOptions::new(iters);
    opts.enforce = false;
    run_smooth(problem, &mut ZeroRule, x0, &opts)
}

/// Next momentum parameter, `(1 + sqrt(1 + 4 t^2)) / 2`.
pub fn next_t(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// Nesterov's accelerated gradient with step `beta` and `t_0 = 1`; the first
/// step has zero momentum and equals a gradient step.
pub fn baseline_nesterov(
    problem: &CompositeProblem,
    x0: &Tensor,
    iters: usize,
) -> Result<SmoothTrace> {
    nesterov_with(problem, x0, iters, false)
}

pub(crate) fn nesterov_with(
    problem: &CompositeProblem,
    x0: &Tensor,
    iters: usize,
    keep_iterates: bool,
) -> Result<SmoothTrace> {
    if !problem.is_smooth() {
        return Err(Error::InvalidParameter(
            "the gradient scheme needs a fully smooth problem".into(),
        ));
    }
    check_start(problem, x0, iters)?;
    let f = problem.smooth_part();
    let beta = f.beta();
    let mut t = 1.0;
    let mut x_prev = x0.clone();
    let mut x = x0.clone();
    let mut objectives = vec![problem.objective(x0)];
    let mut records = Vec::with_capacity(iters);
    let mut iterates = keep_iterates.then(|| vec![x.clone()]);
    for n in 0..iters {
        let t_next = next_t(t);
        let w = x.add_scaled((t - 1.0) / t_next, &x.sub(&x_prev));
        let grad = f.gradient(&w);
        let next = w.add_scaled(-beta, &grad);
        check_finite(&next, n, "iterate")?;
        records.push(SmoothRecord {
            n,
            objective: *objectives.last().unwrap(),
            grad_norm: grad.norm(),
            eps: 0.0,
            raw_dev_norm: 0.0,
            dev_norm: 0.0,
            feasible: true,
            enforced: false,
        });
        x_prev = std::mem::replace(&mut x, next);
        t = t_next;
        objectives.push(finite_objective(problem, &x, n)?);
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }
    }
    let rate_factors = vec![1.0; objectives.len()];
    Ok(SmoothTrace {
        beta,
        objectives,
        records,
        rate_factors,
        rate_bounds: None,
        iterates,
        x_final: x,
        status: RunStatus::Completed,
        certified: false,
    })
}
