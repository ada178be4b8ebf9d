//! Deviation-based first-order schemes for convex problems `min f + g`.
//!
//! The gradient scheme `x_{n+1} = x_n - beta (grad f(x_n) + dx_n)` and the
//! forward-backward scheme with two deviations are run with per-iteration
//! certificates: the deviation bound, the objective/rate bound for the smooth
//! case and the Lyapunov energy for the forward-backward case. Deviations can
//! come from any [`smooth::SmoothRule`] / [`nonsmooth::FbRule`], including a
//! trained convolutional network whose output is squashed into the feasible
//! set (see [`learned`]).

pub mod error;
pub mod learned;
pub mod linear;
pub mod nonsmooth;
pub mod objectives;
pub mod smooth;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use linear::{adjoint_test, power_method, DenseMatrix, Identity, LinearMap};
pub use objectives::{CompositeProblem, ProxFn, SmoothFn};
pub use tensor::{inner, norm, Tensor};

/// Absolute slack used by every feasibility certificate. It is combined with a
/// relative term of the same size, see [`within_bound`].
pub const CERT_SLACK: f64 = 1e-12;

/// `lhs <= rhs` up to the certificate slack.
#[inline]
pub fn within_bound(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + CERT_SLACK * (1.0 + rhs.abs())
}
