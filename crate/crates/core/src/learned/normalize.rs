//! Safeguard layers mapping arbitrary proposals into the feasible deviation
//! sets. Both rely on `|h / sqrt(|h|^2 + 1)| < 1`.

use crate::nonsmooth::FbState;
use crate::objectives::CompositeProblem;
use crate::tensor::Tensor;

/// `h / sqrt(|h|^2 + 1)`, a map onto the open unit ball.
pub fn squash(h: &Tensor) -> Tensor {
    h.scale(1.0 / (h.norm_sq() + 1.0).sqrt())
}

/// `eps * squash(h) * |grad|`; strictly inside the ball `eps |grad|`.
pub fn normalize_smooth(h: &Tensor, grad: &Tensor, eps: f64) -> Tensor {
    assert!(h.same_shape(grad), "normalize_smooth: shape mismatch");
    // same operation order as the tape version, so both agree bit for bit
    squash(h).scale(eps * grad.norm())
}

/// Scale of the first forward-backward deviation:
/// `sqrt(kappa_a (2 beta - gamma_prev) / gamma_prev) * |x_n - x_{n-1} - beta/(2 beta - gamma_prev) dx2_{n-1}|`.
pub fn fb_first_scale(state: &FbState, beta: f64, kappa_a: f64) -> f64 {
    let gp = state.gamma_prev;
    (kappa_a * (2.0 * beta - gp) / gp).sqrt() * state.first_radius(beta)
}

/// Scale of the second deviation:
/// `sqrt(gamma (2 beta - gamma) kappa_b) * |grad f(w_n) - grad f(w_{n-1}) - (x_n - w_{n-1}) / beta|`.
pub fn fb_second_scale(state: &FbState, grad_w: &Tensor, beta: f64, gamma: f64, kappa_b: f64) -> f64 {
    (gamma * (2.0 * beta - gamma) * kappa_b).sqrt() * state.second_radius(grad_w, beta)
}

pub fn normalize_fb_first(h1: &Tensor, state: &FbState, beta: f64, kappa_a: f64) -> Tensor {
    squash(h1).scale(fb_first_scale(state, beta, kappa_a))
}

pub fn normalize_fb_second(
    h2: &Tensor,
    state: &FbState,
    grad_w: &Tensor,
    beta: f64,
    gamma: f64,
    kappa_b: f64,
) -> Tensor {
    squash(h2).scale(fb_second_scale(state, grad_w, beta, gamma, kappa_b))
}

/// Both deviations in evaluation order: `dx1` from `h1`, then
/// `w_n = x_n + dx1` and `grad f(w_n)`, then `dx2` from `h2`.
///
/// Returns `(dx1, dx2, grad f(w_n))`.
pub fn normalize_fb(
    h1: &Tensor,
    h2: &Tensor,
    state: &FbState,
    problem: &CompositeProblem,
    kappa: (f64, f64),
    gamma: f64,
) -> (Tensor, Tensor, Tensor) {
    let beta = problem.f.beta();
    let d1 = normalize_fb_first(h1, state, beta, kappa.0);
    let grad_w = problem.f.gradient(&state.x.add(&d1));
    let d2 = normalize_fb_second(h2, state, &grad_w, beta, gamma, kappa.1);
    (d1, d2, grad_w)
}
