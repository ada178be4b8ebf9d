//! Smooth data/regularization terms, the l1-composed-with-orthogonal prox term
//! and the composite problem `F = f + g` (optionally `+ smooth_g`).

use crate::error::{Error, Result};
use crate::linear::{adjoint_test, check_input, Identity, SharedMap};
use crate::tensor::{rand_unit, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// One additive piece of a [`SmoothFn`].
#[derive(Clone, Debug)]
pub enum SmoothTerm {
    /// `weight * |A x - y|^2`
    LeastSquares {
        op: SharedMap,
        data: Tensor,
        weight: f64,
    },
    /// `lambda * sum_i huber_delta((D x)_i)`
    HuberTv {
        op: SharedMap,
        lambda: f64,
        delta: f64,
    },
}

impl SmoothTerm {
    fn inv_beta(&self) -> f64 {
        match self {
            SmoothTerm::LeastSquares { op, weight, .. } => 2.0 * weight * op.norm_bound().powi(2),
            SmoothTerm::HuberTv { op, lambda, delta } => lambda * op.norm_bound().powi(2) / delta,
        }
    }

    fn value(&self, x: &Tensor) -> f64 {
        match self {
            SmoothTerm::LeastSquares { op, data, weight } => {
                weight * op.apply(x).sub(data).norm_sq()
            }
            SmoothTerm::HuberTv { op, lambda, delta } => {
                lambda * op.apply(x).data().iter().map(|&t| huber_scalar(t, *delta)).sum::<f64>()
            }
        }
    }

    fn gradient(&self, x: &Tensor) -> Tensor {
        match self {
            SmoothTerm::LeastSquares { op, data, weight } => {
                op.adjoint(&op.apply(x).sub(data)).scale(2.0 * weight)
            }
            SmoothTerm::HuberTv { op, lambda, delta } => {
                let d = op.apply(x).map(|t| huber_derivative(t, *delta));
                op.adjoint(&d).scale(*lambda)
            }
        }
    }
}

/// Differentiable convex function with `1/beta`-Lipschitz gradient, kept as a
/// sum of structured terms so the same function can be rebuilt on an autodiff
/// tape.
#[derive(Clone, Debug)]
pub struct SmoothFn {
    shape: Vec<usize>,
    terms: Vec<SmoothTerm>,
}

impl SmoothFn {
    /// The zero function on `shape` (beta = +inf).
    pub fn zero(shape: &[usize]) -> Result<Self> {
        Tensor::zeros(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            terms: Vec::new(),
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn terms(&self) -> &[SmoothTerm] {
        &self.terms
    }

    /// Lipschitz constant of the gradient, `1/beta`; reciprocal addition over
    /// the terms.
    pub fn inv_beta(&self) -> f64 {
        self.terms.iter().map(SmoothTerm::inv_beta).sum()
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.inv_beta()
    }

    pub fn value(&self, x: &Tensor) -> f64 {
        check_input(&self.shape, x);
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub fn gradient(&self, x: &Tensor) -> Tensor {
        check_input(&self.shape, x);
        let mut g = Tensor::zeros_like(x);
        for t in &self.terms {
            g = g.add(&t.gradient(x));
        }
        g
    }

    /// Returns `c * f`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {c}")));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                SmoothTerm::LeastSquares { op, data, weight } => SmoothTerm::LeastSquares {
                    op: op.clone(),
                    data: data.clone(),
                    weight: weight * c,
                },
                SmoothTerm::HuberTv { op, lambda, delta } => SmoothTerm::HuberTv {
                    op: op.clone(),
                    lambda: lambda * c,
                    delta: *delta,
                },
            })
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            terms,
        })
    }
}

/// `f_y(x) = |A x - y|^2`, gradient `2 A^T (A x - y)`, `beta = 1 / (2 |A|^2)`.
pub fn least_squares(op: SharedMap, y: Tensor) -> Result<SmoothFn> {
    weighted_least_squares(op, y, 1.0)
}

/// `weight * |A x - y|^2`.
pub fn weighted_least_squares(op: SharedMap, y: Tensor, weight: f64) -> Result<SmoothFn> {
    if y.shape() != op.out_shape() {
        return Err(Error::ShapeMismatch {
            expected: op.out_shape().to_vec(),
            got: y.shape().to_vec(),
        });
    }
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::InvalidParameter(format!("weight must be positive, got {weight}")));
    }
    Ok(SmoothFn {
        shape: op.in_shape().to_vec(),
        terms: vec![SmoothTerm::LeastSquares {
            op,
            data: y,
            weight,
        }],
    })
}

/// Huber function: `t^2 / (2 delta)` for `|t| < delta`, else `|t| - delta/2`.
pub fn huber_scalar(t: f64, delta: f64) -> f64 {
    if t.abs() < delta {
        t * t / (2.0 * delta)
    } else {
        t.abs() - delta / 2.0
    }
}

/// `h'(t) = clamp(t / delta, -1, 1)`; both branches agree at `|t| = delta`.
pub fn huber_derivative(t: f64, delta: f64) -> f64 {
    (t / delta).clamp(-1.0, 1.0)
}

/// `lambda * H_delta(D x)` with `beta = delta / (lambda |D|^2)`.
pub fn huber_tv(op: SharedMap, lambda: f64, delta: f64) -> Result<SmoothFn> {
    if !(lambda > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "huber_tv needs lambda > 0 and delta > 0, got {lambda}, {delta}"
        )));
    }
    Ok(SmoothFn {
        shape: op.in_shape().to_vec(),
        terms: vec![SmoothTerm::HuberTv { op, lambda, delta }],
    })
}

/// Sum of two smooth functions; `1/beta = 1/beta1 + 1/beta2`.
pub fn sum_smooth(f1: &SmoothFn, f2: &SmoothFn) -> Result<SmoothFn> {
    if f1.shape != f2.shape {
        return Err(Error::ShapeMismatch {
            expected: f1.shape.clone(),
            got: f2.shape.clone(),
        });
    }
    let mut terms = f1.terms.clone();
    terms.extend(f2.terms.iter().cloned());
    Ok(SmoothFn {
        shape: f1.shape.clone(),
        terms,
    })
}

/// Elementwise `sign(x) max(|x| - gamma, 0)`.
pub fn soft_threshold(x: &Tensor, gamma: f64) -> Tensor {
    x.map(|v| soft_threshold_scalar(v, gamma))
}

#[inline]
pub fn soft_threshold_scalar(v: f64, gamma: f64) -> f64 {
    if v > gamma {
        v - gamma
    } else if v < -gamma {
        v + gamma
    } else {
        0.0
    }
}

/// Proper convex lsc term handled through its proximal map.
#[derive(Clone, Debug)]
pub enum ProxFn {
    Zero { shape: Vec<usize> },
    /// `lambda * |W x|_1` with `W W^T = mu Id`.
    L1Orthogonal { op: SharedMap, lambda: f64, mu: f64 },
}

impl ProxFn {
    pub fn zero(shape: &[usize]) -> Result<Self> {
        Tensor::zeros(shape)?;
        Ok(ProxFn::Zero {
            shape: shape.to_vec(),
        })
    }

    /// `lambda * |x|_1`.
    pub fn l1(shape: &[usize], lambda: f64) -> Result<Self> {
        l1_of_orthogonal(Arc::new(Identity::new(shape)?), lambda, 1.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ProxFn::Zero { .. })
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            ProxFn::Zero { shape } => shape,
            ProxFn::L1Orthogonal { op, .. } => op.in_shape(),
        }
    }

    pub fn value(&self, x: &Tensor) -> f64 {
        check_input(self.shape(), x);
        match self {
            ProxFn::Zero { .. } => 0.0,
            ProxFn::L1Orthogonal { op, lambda, .. } => {
                lambda * op.apply(x).data().iter().map(|v| v.abs()).sum::<f64>()
            }
        }
    }

    /// `argmin_z g(z) + |z - x|^2 / (2 gamma)`.
    pub fn prox(&self, x: &Tensor, gamma: f64) -> Tensor {
        check_input(self.shape(), x);
        match self {
            ProxFn::Zero { .. } => x.clone(),
            ProxFn::L1Orthogonal { op, lambda, mu } => {
                let wx = op.apply(x);
                let shrunk = soft_threshold(&wx, mu * lambda * gamma);
                x.add_scaled(1.0 / mu, &op.adjoint(&shrunk.sub(&wx)))
            }
        }
    }
}

/// `lambda |W x|_1` for `W W^T = mu Id`; the orthogonality relation and the
/// adjoint are checked on random probes at construction.
pub fn l1_of_orthogonal(op: SharedMap, lambda: f64, mu: f64) -> Result<ProxFn> {
    if !(lambda > 0.0 && mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "l1_of_orthogonal needs lambda > 0 and mu > 0, got {lambda}, {mu}"
        )));
    }
    let adj = adjoint_test(op.as_ref(), 3, 0x5eed);
    if adj > 1e-8 {
        return Err(Error::NotOrthogonal { residual: adj });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a7);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let y = rand_unit(op.out_shape(), &mut rng);
        let r = op.apply(&op.adjoint(&y)).add_scaled(-mu, &y).norm();
        worst = worst.max(r);
    }
    if worst > 1e-8 {
        return Err(Error::NotOrthogonal { residual: worst });
    }
    Ok(ProxFn::L1Orthogonal { op, lambda, mu })
}

/// `min f(x) + g(x) (+ smooth_g(x))` for data `y`.
///
/// `f` and the optional `smooth_g` are kept apart so learned rules can see
/// their gradients as separate inputs.
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    pub f: SmoothFn,
    pub g: ProxFn,
    pub smooth_g: Option<SmoothFn>,
    pub data: Tensor,
}

impl CompositeProblem {
    /// Fully smooth problem `f + smooth_g`.
    pub fn smooth(f: SmoothFn, smooth_g: Option<SmoothFn>, data: Tensor) -> Result<Self> {
        if let Some(sg) = &smooth_g {
            if sg.shape() != f.shape() {
                return Err(Error::ShapeMismatch {
                    expected: f.shape().to_vec(),
                    got: sg.shape().to_vec(),
                });
            }
        }
        let g = ProxFn::zero(f.shape())?;
        Self::validate(Self {
            f,
            g,
            smooth_g,
            data,
        })
    }

    /// Composite problem `f + g` for forward-backward splitting.
    pub fn forward_backward(f: SmoothFn, g: ProxFn, data: Tensor) -> Result<Self> {
        if g.shape() != f.shape() {
            return Err(Error::ShapeMismatch {
                expected: f.shape().to_vec(),
                got: g.shape().to_vec(),
            });
        }
        Self::validate(Self {
            f,
            g,
            smooth_g: None,
            data,
        })
    }

    fn validate(self) -> Result<Self> {
        let beta = self.f.beta();
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "f must have a finite positive beta, got {beta}"
            )));
        }
        Ok(self)
    }

    pub fn shape(&self) -> &[usize] {
        self.f.shape()
    }

    pub fn is_smooth(&self) -> bool {
        self.g.is_zero()
    }

    /// `f + smooth_g`, the function the gradient scheme minimizes.
    pub fn smooth_part(&self) -> SmoothFn {
        match &self.smooth_g {
            Some(sg) => sum_smooth(&self.f, sg).expect("shapes checked at construction"),
            None => self.f.clone(),
        }
    }

    pub fn objective(&self, x: &Tensor) -> f64 {
        let mut v = self.f.value(x) + self.g.value(x);
        if let Some(sg) = &self.smooth_g {
            v += sg.value(x);
        }
        v
    }

    /// Same problem with every term multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let g = match &self.g {
            ProxFn::Zero { shape } => ProxFn::Zero {
                shape: shape.clone(),
            },
            ProxFn::L1Orthogonal { op, lambda, mu } => ProxFn::L1Orthogonal {
                op: op.clone(),
                lambda: lambda * c,
                mu: *mu,
            },
        };
        Ok(Self {
            f: self.f.scaled(c)?,
            g,
            smooth_g: self.smooth_g.as_ref().map(|s| s.scaled(c)).transpose()?,
            data: self.data.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::DenseMatrix;

    fn id(n: usize) -> SharedMap {
        Arc::new(Identity::new(&[n]).unwrap())
    }

    fn v(d: &[f64]) -> Tensor {
        Tensor::vector(d.to_vec()).unwrap()
    }

    #[test]
    fn least_squares_examples() {
        let f = least_squares(id(2), v(&[0.0, 0.0])).unwrap();
        let x = v(&[1.0, 1.0]);
        assert_eq!(f.value(&x), 2.0);
        assert_eq!(f.gradient(&x).data(), &[2.0, 2.0]);
        assert_eq!(f.beta(), 0.5);

        let f = least_squares(id(1), v(&[1.0])).unwrap();
        assert_eq!(f.value(&v(&[3.0])), 4.0);
        assert_eq!(f.gradient(&v(&[3.0])).data(), &[4.0]);

        let a: SharedMap = Arc::new(DenseMatrix::new(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap());
        let x = v(&[0.5, -1.0]);
        let f = least_squares(a.clone(), a.apply(&x)).unwrap();
        assert_eq!(f.value(&x), 0.0);
        assert_eq!(f.gradient(&x).norm(), 0.0);
    }

    #[test]
    fn least_squares_shape_mismatch() {
        assert!(least_squares(id(2), v(&[0.0])).is_err());
    }

    #[test]
    fn huber_scalar_examples() {
        assert_eq!(huber_scalar(0.0, 0.01), 0.0);
        assert!((huber_scalar(0.005, 0.01) - 0.00125).abs() < 1e-15);
        assert!((huber_scalar(0.02, 0.01) - 0.015).abs() < 1e-15);
        assert_eq!(huber_derivative(0.01, 0.01), 1.0);
        assert_eq!(huber_derivative(-0.01, 0.01), -1.0);
    }

    #[test]
    fn sum_smooth_examples() {
        // 1/beta = 2 |A|^2 + (lambda/delta) |D|^2 = 2 + 8 * 0.15 = 3.2 with |D|^2 = 8
        let d: SharedMap = Arc::new(DenseMatrix::diagonal(&[8f64.sqrt(); 3]).unwrap());
        let f = least_squares(id(3), v(&[0.0; 3])).unwrap();
        let h = huber_tv(d, 0.0015, 0.01).unwrap();
        assert!((sum_smooth(&f, &h).unwrap().inv_beta() - 3.2).abs() < 1e-12);

        let z = SmoothFn::zero(&[3]).unwrap();
        let s = sum_smooth(&f, &z).unwrap();
        let x = v(&[1.0, -2.0, 0.5]);
        assert_eq!(s.value(&x), f.value(&x));
        assert_eq!(s.gradient(&x), f.gradient(&x));
        assert_eq!(s.inv_beta(), f.inv_beta());

        // half squared norm = |x / sqrt2|^2
        let half: SharedMap = Arc::new(DenseMatrix::diagonal(&[0.5f64.sqrt(); 3]).unwrap());
        let q = least_squares(half, v(&[0.0; 3])).unwrap();
        let qq = sum_smooth(&q, &q).unwrap();
        let g = qq.gradient(&x);
        for (gi, xi) in g.data().iter().zip(x.data()) {
            assert!((gi - 2.0 * xi).abs() < 1e-12);
        }
        assert!((qq.inv_beta() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&v(&[0.0]), 0.5).data(), &[0.0]);
        let s = soft_threshold(&v(&[1.2, -0.3]), 0.5);
        assert!((s.data()[0] - 0.7).abs() < 1e-15);
        assert_eq!(s.data()[1], 0.0);
        assert!((soft_threshold_scalar(0.9, 0.4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l1_identity_prox_is_soft_threshold() {
        let g = ProxFn::l1(&[3], 0.3).unwrap();
        let x = v(&[1.0, -0.1, -2.0]);
        let p = g.prox(&x, 2.0);
        let s = soft_threshold(&x, 0.6);
        for (a, b) in p.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((g.value(&x) - 0.3 * 3.1).abs() < 1e-15);
    }

    #[test]
    fn l1_rejects_non_orthogonal() {
        let w: SharedMap = Arc::new(DenseMatrix::new(2, 2, vec![1.0, 1.0, 0.0, 1.0]).unwrap());
        assert!(matches!(
            l1_of_orthogonal(w, 1.0, 1.0),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn composite_rejects_zero_f() {
        let f = SmoothFn::zero(&[2]).unwrap();
        assert!(CompositeProblem::smooth(f, None, v(&[0.0, 0.0])).is_err());
    }
}
