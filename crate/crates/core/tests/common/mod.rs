#![allow(dead_code)]

use std::sync::Arc;

use devopt_core::linear::SharedMap;
use devopt_core::objectives::{huber_tv, l1_of_orthogonal, least_squares};
use devopt_core::tensor::randn;
use devopt_core::transforms::{discrete_gradient, haar_wavelet, ray_transform, GridGeometry};
use devopt_core::{CompositeProblem, DenseMatrix, LinearMap, ProxFn, Tensor};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = randn(&[rows * cols], rng).into_data();
    DenseMatrix::new(rows, cols, data).unwrap()
}

/// Least squares `|Ax - y|^2` with a tall Gaussian `A`, so strongly convex,
/// together with its minimizer from the normal equations.
pub fn strongly_convex(seed: u64) -> (CompositeProblem, Tensor) {
    let mut r = rng(seed);
    let d = r.random_range(10..=100);
    let m = d + r.random_range(10..=40);
    let a = gaussian_matrix(m, d, &mut r);
    let y = randn(&[m], &mut r);
    let am = DMatrix::from_row_slice(m, d, a.entries());
    let normal = am.transpose() * &am;
    let rhs = am.transpose() * DVector::from_column_slice(y.data());
    let xs = normal.cholesky().expect("full column rank").solve(&rhs);
    let f = least_squares(Arc::new(a), y.clone()).unwrap();
    (
        CompositeProblem::smooth(f, None, y).unwrap(),
        Tensor::vector(xs.as_slice().to_vec()).unwrap(),
    )
}

/// `|Ax - y|^2 + lambda |x|_1` with normalized `A`, so `beta = 1/2`.
pub fn lasso(seed: u64) -> CompositeProblem {
    let mut r = rng(seed);
    let d = r.random_range(20..=100);
    let m = r.random_range(15..=80);
    let a = gaussian_matrix(m, d, &mut r).normalized();
    let y = randn(&[m], &mut r);
    let lam = 0.1 * a.adjoint(&y).max_abs();
    let f = least_squares(Arc::new(a), y.clone()).unwrap();
    CompositeProblem::forward_backward(f, ProxFn::l1(&[d], lam).unwrap(), y).unwrap()
}

/// Piecewise-constant image of a few random rectangles, values in `[0, 1]`.
pub fn rectangles(n: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    let mut data = vec![0.0; n * n];
    for _ in 0..r.random_range(2..=5) {
        let (r0, c0) = (r.random_range(0..n / 2), r.random_range(0..n / 2));
        let (h, w) = (r.random_range(2..n / 2), r.random_range(2..n / 2));
        let v: f64 = r.random();
        for i in r0..(r0 + h).min(n) {
            for j in c0..(c0 + w).min(n) {
                data[i * n + j] = v;
            }
        }
    }
    Tensor::image(n, n, data).unwrap()
}

pub fn ray32() -> SharedMap {
    Arc::new(ray_transform(GridGeometry::covering(32, 32)).unwrap())
}

fn noisy_data(a: &SharedMap, truth: &Tensor, seed: u64) -> Tensor {
    let clean = a.apply(truth);
    let e = randn(clean.shape(), &mut rng(seed ^ 0xabc));
    clean.add_scaled(0.05 * clean.norm() / e.norm(), &e)
}

/// 32 x 32 ray-transform reconstruction with Huber-TV, `1/beta = 2 + 8 lambda/delta`.
pub fn huber_toy(a: &SharedMap, seed: u64) -> CompositeProblem {
    let y = noisy_data(a, &rectangles(32, seed), seed);
    let f = least_squares(a.clone(), y.clone()).unwrap();
    let reg = huber_tv(Arc::new(discrete_gradient(32).unwrap()), 0.0015, 0.01).unwrap();
    CompositeProblem::smooth(f, Some(reg), y).unwrap()
}

/// 32 x 32 ray-transform reconstruction with a Haar l1 penalty, `beta = 1/2`.
pub fn wavelet_toy(a: &SharedMap, seed: u64) -> CompositeProblem {
    let y = noisy_data(a, &rectangles(32, seed), seed);
    let f = least_squares(a.clone(), y.clone()).unwrap();
    let g = l1_of_orthogonal(Arc::new(haar_wavelet(32, 3).unwrap()), 0.0005, 1.0).unwrap();
    CompositeProblem::forward_backward(f, g, y).unwrap()
}

/// Small image problem for the autodiff checks.
pub fn small_huber(n: usize, seed: u64) -> CompositeProblem {
    let a: SharedMap = Arc::new(ray_transform(GridGeometry::covering(n, n)).unwrap());
    let y = noisy_data(&a, &rectangles(n, seed), seed);
    let f = least_squares(a, y.clone()).unwrap();
    let reg = huber_tv(Arc::new(discrete_gradient(n).unwrap()), 0.0015, 0.01).unwrap();
    CompositeProblem::smooth(f, Some(reg), y).unwrap()
}

pub fn small_wavelet(n: usize, seed: u64) -> CompositeProblem {
    let a: SharedMap = Arc::new(ray_transform(GridGeometry::covering(n, n)).unwrap());
    let y = noisy_data(&a, &rectangles(n, seed), seed);
    let f = least_squares(a, y.clone()).unwrap();
    let g = l1_of_orthogonal(Arc::new(haar_wavelet(n, 2).unwrap()), 0.0005, 1.0).unwrap();
    CompositeProblem::forward_backward(f, g, y).unwrap()
}

pub fn zeros_like(p: &CompositeProblem) -> Tensor {
    Tensor::zeros(p.shape()).unwrap()
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
