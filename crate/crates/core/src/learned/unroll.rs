//! The solvers rebuilt on a tape so `F(x_N)` can be differentiated with
//! respect to the network parameters.
//!
//! Every expression mirrors the operation order of the plain solvers, so a
//! tape unroll and a trace run with the same rule produce identical iterates.

use crate::error::{Error, Result};
use crate::learned::net::{BoundNet, ConvNet};
use crate::learned::tape::{Tape, Var};
use crate::nonsmooth::GammaSchedule;
use crate::objectives::{CompositeProblem, ProxFn, SmoothFn, SmoothTerm};
use crate::tensor::Tensor;

/// `(h, w)` of an image-shaped problem.
pub fn image_dims(shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [h, w] => Ok((*h, *w)),
        _ => Err(Error::InvalidShape(shape.to_vec())),
    }
}

pub fn smooth_gradient(tape: &mut Tape, f: &SmoothFn, x: Var) -> Result<Var> {
    let mut g = tape.leaf(&Tensor::zeros(f.shape())?);
    for term in f.terms() {
        let t = match term {
            SmoothTerm::LeastSquares { op, data, weight } => {
                let ax = tape.lin(x, op)?;
                let y = tape.leaf(data);
                let r = tape.sub(ax, y)?;
                let back = tape.lin_adjoint(r, op)?;
                tape.scale(back, 2.0 * weight)?
            }
            SmoothTerm::HuberTv { op, lambda, delta } => {
                let dx = tape.lin(x, op)?;
                let d = tape.huber_grad(dx, *delta)?;
                let back = tape.lin_adjoint(d, op)?;
                tape.scale(back, *lambda)?
            }
        };
        g = tape.add(g, t)?;
    }
    Ok(g)
}

fn term_value(tape: &mut Tape, term: &SmoothTerm, x: Var) -> Result<Var> {
    match term {
        SmoothTerm::LeastSquares { op, data, weight } => {
            let ax = tape.lin(x, op)?;
            let y = tape.leaf(data);
            let r = tape.sub(ax, y)?;
            let s = tape.sq_norm(r)?;
            tape.scale(s, *weight)
        }
        SmoothTerm::HuberTv { op, lambda, delta } => {
            let dx = tape.lin(x, op)?;
            let s = tape.huber_sum(dx, *delta)?;
            tape.scale(s, *lambda)
        }
    }
}

/// `None` for the zero function.
pub fn smooth_value(tape: &mut Tape, f: &SmoothFn, x: Var) -> Result<Option<Var>> {
    let mut acc: Option<Var> = None;
    for term in f.terms() {
        let v = term_value(tape, term, x)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, v)?,
            None => v,
        });
    }
    Ok(acc)
}

pub fn prox(tape: &mut Tape, g: &ProxFn, x: Var, gamma: f64) -> Result<Var> {
    match g {
        ProxFn::Zero { .. } => Ok(x),
        ProxFn::L1Orthogonal { op, lambda, mu } => {
            let wx = tape.lin(x, op)?;
            let shrunk = tape.soft_threshold(wx, mu * lambda * gamma)?;
            let d = tape.sub(shrunk, wx)?;
            let back = tape.lin_adjoint(d, op)?;
            tape.add_scaled(x, 1.0 / mu, back)
        }
    }
}

pub fn prox_value(tape: &mut Tape, g: &ProxFn, x: Var) -> Result<Option<Var>> {
    match g {
        ProxFn::Zero { .. } => Ok(None),
        ProxFn::L1Orthogonal { op, lambda, .. } => {
            let wx = tape.lin(x, op)?;
            let s = tape.sum_abs(wx)?;
            Ok(Some(tape.scale(s, *lambda)?))
        }
    }
}

/// `F(x)` on the tape.
pub fn objective(tape: &mut Tape, problem: &CompositeProblem, x: Var) -> Result<Var> {
    let parts = [
        smooth_value(tape, &problem.f, x)?,
        prox_value(tape, &problem.g, x)?,
        match &problem.smooth_g {
            Some(sg) => smooth_value(tape, sg, x)?,
            None => None,
        },
    ];
    let mut acc: Option<Var> = None;
    for p in parts.into_iter().flatten() {
        acc = Some(match acc {
            Some(a) => tape.add(a, p)?,
            None => p,
        });
    }
    match acc {
        Some(v) => Ok(v),
        None => tape.leaf_raw(&[1], vec![0.0]),
    }
}

/// Raw network output for the gradient scheme, from the stacked inputs
/// `x, grad f, grad g, previous deviation`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn smooth_proposal(
    tape: &mut Tape,
    net: &ConvNet,
    bound: &BoundNet,
    x: Var,
    grad_f: Var,
    grad_g: Var,
    prev: Var,
    dims: (usize, usize),
) -> Result<Var> {
    let input = tape.concat(&[x, grad_f, grad_g, prev], dims.0, dims.1)?;
    net.forward(tape, bound, input, dims.0, dims.1)
}

/// `eps * squash(h) * |grad|`.
pub(crate) fn normalize_smooth(tape: &mut Tape, h: Var, grad: Var, eps: f64) -> Result<Var> {
    let u = tape.soft_unit(h)?;
    let n = tape.norm(grad)?;
    let r = tape.scale(n, eps)?;
    tape.mul_scalar(u, r)
}

/// Tape-resident iteration state of the forward-backward scheme.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FbVars {
    pub x: Var,
    pub x_prev: Var,
    pub w_prev: Var,
    pub grad_w_prev: Var,
    pub dev1_prev: Var,
    pub dev2_prev: Var,
    pub gamma_prev: f64,
}

/// First deviation from inputs `x_n, grad f(w_{n-1}), dx1_{n-1}`.
pub(crate) fn fb_first(
    tape: &mut Tape,
    net: &ConvNet,
    bound: &BoundNet,
    s: &FbVars,
    beta: f64,
    kappa_a: f64,
    normalize: bool,
    dims: (usize, usize),
) -> Result<Var> {
    let input = tape.concat(&[s.x, s.grad_w_prev, s.dev1_prev], dims.0, dims.1)?;
    let h = net.forward(tape, bound, input, dims.0, dims.1)?;
    if !normalize {
        return Ok(h);
    }
    let gp = s.gamma_prev;
    let d = tape.sub(s.x, s.x_prev)?;
    let d = tape.add_scaled(d, -(beta / (2.0 * beta - gp)), s.dev2_prev)?;
    let r = tape.norm(d)?;
    let r = tape.scale(r, (kappa_a * (2.0 * beta - gp) / gp).sqrt())?;
    let u = tape.soft_unit(h)?;
    tape.mul_scalar(u, r)
}

/// Second deviation from inputs `x_n, grad f(w_{n-1}), dx2_{n-1}, dx1_n`;
/// needs `grad f(w_n)` for the scale.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fb_second(
    tape: &mut Tape,
    net: &ConvNet,
    bound: &BoundNet,
    s: &FbVars,
    dev1: Var,
    grad_w: Var,
    beta: f64,
    gamma: f64,
    kappa_b: f64,
    normalize: bool,
    dims: (usize, usize),
) -> Result<Var> {
    let input = tape.concat(&[s.x, s.grad_w_prev, s.dev2_prev, dev1], dims.0, dims.1)?;
    let h = net.forward(tape, bound, input, dims.0, dims.1)?;
    if !normalize {
        return Ok(h);
    }
    let a = tape.sub(grad_w, s.grad_w_prev)?;
    let b = tape.sub(s.x, s.w_prev)?;
    let d = tape.add_scaled(a, -1.0 / beta, b)?;
    let r = tape.norm(d)?;
    let r = tape.scale(r, (gamma * (2.0 * beta - gamma) * kappa_b).sqrt())?;
    let u = tape.soft_unit(h)?;
    tape.mul_scalar(u, r)
}

/// Unrolls `iters` steps of the learned gradient scheme from `x0` and returns
/// `(x_N, F(x_N))` nodes. `eps = None` skips the safeguard layer.
#[allow(clippy::too_many_arguments)]
pub fn unroll_smooth(
    tape: &mut Tape,
    problem: &CompositeProblem,
    net: &ConvNet,
    bound: &BoundNet,
    eps: Option<f64>,
    x0: &Tensor,
    iters: usize,
) -> Result<(Var, Var)> {
    if !problem.is_smooth() {
        return Err(Error::InvalidParameter("gradient scheme needs a smooth problem".into()));
    }
    let dims = image_dims(problem.shape())?;
    let beta = problem.smooth_part().beta();
    let zero = tape.leaf(&Tensor::zeros(problem.shape())?);
    let mut x = tape.leaf(x0);
    let mut prev = zero;
    for _ in 0..iters {
        let gf = smooth_gradient(tape, &problem.f, x)?;
        let (gg, grad) = match &problem.smooth_g {
            Some(sg) => {
                let gg = smooth_gradient(tape, sg, x)?;
                (gg, tape.add(gf, gg)?)
            }
            None => (zero, gf),
        };
        let h = smooth_proposal(tape, net, bound, x, gf, gg, prev, dims)?;
        let dev = match eps {
            Some(e) => normalize_smooth(tape, h, grad, e)?,
            None => h,
        };
        let s = tape.add(grad, dev)?;
        x = tape.add_scaled(x, -beta, s)?;
        prev = dev;
    }
    let loss = objective(tape, problem, x)?;
    Ok((x, loss))
}

/// Unrolls the learned forward-backward scheme; step 0 uses zero deviations.
/// `kappa = None` skips the safeguard layers.
#[allow(clippy::too_many_arguments)]
pub fn unroll_fb(
    tape: &mut Tape,
    problem: &CompositeProblem,
    nets: (&ConvNet, &ConvNet),
    bound: (&BoundNet, &BoundNet),
    kappa: Option<(f64, f64)>,
    gammas: &GammaSchedule,
    x0: &Tensor,
    iters: usize,
) -> Result<(Var, Var)> {
    let dims = image_dims(problem.shape())?;
    let beta = problem.f.beta();
    let zero = tape.leaf(&Tensor::zeros(problem.shape())?);
    let x = tape.leaf(x0);
    let mut s = FbVars {
        x,
        x_prev: x,
        w_prev: x,
        grad_w_prev: zero,
        dev1_prev: zero,
        dev2_prev: zero,
        gamma_prev: gammas.get(0),
    };
    for n in 0..iters {
        let gamma = gammas.get(n);
        let (dev1, dev2, w, grad_w);
        if n == 0 {
            dev1 = zero;
            dev2 = zero;
            w = s.x;
            grad_w = smooth_gradient(tape, &problem.f, w)?;
        } else {
            let (k, on) = match kappa {
                Some(k) => (k, true),
                None => ((0.0, 0.0), false),
            };
            dev1 = fb_first(tape, nets.0, bound.0, &s, beta, k.0, on, dims)?;
            w = tape.add(s.x, dev1)?;
            grad_w = smooth_gradient(tape, &problem.f, w)?;
            dev2 = fb_second(tape, nets.1, bound.1, &s, dev1, grad_w, beta, gamma, k.1, on, dims)?;
        }
        let a = tape.add_scaled(s.x, -gamma, grad_w)?;
        let a = tape.add_scaled(a, gamma / beta, dev1)?;
        let a = tape.add(a, dev2)?;
        let next = prox(tape, &problem.g, a, gamma)?;
        s = FbVars {
            x: next,
            x_prev: s.x,
            w_prev: w,
            grad_w_prev: grad_w,
            dev1_prev: dev1,
            dev2_prev: dev2,
            gamma_prev: gamma,
        };
    }
    let loss = objective(tape, problem, s.x)?;
    Ok((s.x, loss))
}

/// `F(x_N)` and its gradient with respect to the network parameters.
pub fn smooth_loss_and_grad(
    problem: &CompositeProblem,
    net: &ConvNet,
    eps: Option<f64>,
    x0: &Tensor,
    iters: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape)?;
    let (_, loss) = unroll_smooth(&mut tape, problem, net, &bound, eps, x0, iters)?;
    let grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), net.gradient(&grads, &bound)))
}

/// `F(x_N)` and the gradients for both networks.
pub fn fb_loss_and_grad(
    problem: &CompositeProblem,
    nets: (&ConvNet, &ConvNet),
    kappa: Option<(f64, f64)>,
    gammas: &GammaSchedule,
    x0: &Tensor,
    iters: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut tape = Tape::new();
    let b1 = nets.0.bind(&mut tape)?;
    let b2 = nets.1.bind(&mut tape)?;
    let (_, loss) = unroll_fb(&mut tape, problem, nets, (&b1, &b2), kappa, gammas, x0, iters)?;
    let grads = tape.backward(loss)?;
    Ok((
        tape.scalar(loss),
        nets.0.gradient(&grads, &b1),
        nets.1.gradient(&grads, &b2),
    ))
}
