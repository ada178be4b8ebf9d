//! Linear operators with an adjoint and a declared operator-norm bound.

use std::fmt::Debug;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{rand_unit, Tensor};

/// A bounded linear map between tensor spaces.
///
/// `norm_bound` is an upper bound on the operator norm; certificates only need
/// a bound, never the exact spectral norm.
pub trait LinearMap: Debug + Send + Sync {
    fn in_shape(&self) -> &[usize];
    fn out_shape(&self) -> &[usize];
    fn apply(&self, x: &Tensor) -> Tensor;
    fn adjoint(&self, y: &Tensor) -> Tensor;
    fn norm_bound(&self) -> f64;
}

pub type SharedMap = Arc<dyn LinearMap>;

pub(crate) fn check_input(expected: &[usize], x: &Tensor) {
    assert_eq!(
        x.shape(),
        expected,
        "linear map applied to a tensor of the wrong shape"
    );
}

/// Largest discrepancy `|<Ax, y> - <x, A^T y>|` over `trials` random unit pairs.
pub fn adjoint_test(op: &dyn LinearMap, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials.max(1))
        .map(|_| {
            let x = rand_unit(op.in_shape(), &mut rng);
            let y = rand_unit(op.out_shape(), &mut rng);
            (op.apply(&x).dot(&y) - x.dot(&op.adjoint(&y))).abs()
        })
        .fold(0.0, f64::max)
}

/// Power iteration on `A^T A`; returns `|A v|` for the final unit iterate,
/// which never exceeds the true operator norm.
pub fn power_method(op: &dyn LinearMap, iters: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = rand_unit(op.in_shape(), &mut rng);
    for _ in 0..iters {
        let w = op.adjoint(&op.apply(&v));
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w.scale(1.0 / n);
    }
    op.apply(&v).norm()
}

/// The identity on a fixed shape.
#[derive(Clone, Debug)]
pub struct Identity {
    shape: Vec<usize>,
}

impl Identity {
    pub fn new(shape: &[usize]) -> Result<Self> {
        Tensor::zeros(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
        })
    }
}

impl LinearMap for Identity {
    fn in_shape(&self) -> &[usize] {
        &self.shape
    }
    fn out_shape(&self) -> &[usize] {
        &self.shape
    }
    fn apply(&self, x: &Tensor) -> Tensor {
        check_input(&self.shape, x);
        x.clone()
    }
    fn adjoint(&self, y: &Tensor) -> Tensor {
        check_input(&self.shape, y);
        y.clone()
    }
    fn norm_bound(&self) -> f64 {
        1.0
    }
}

/// Dense row-major matrix acting on 1-D vectors.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    in_shape: [usize; 1],
    out_shape: [usize; 1],
    norm_bound: f64,
    /// Optional explicit adjoint (row-major, cols x rows). Only used to build
    /// deliberately inconsistent maps in tests.
    adjoint_override: Option<Vec<f64>>,
}

impl DenseMatrix {
    /// Builds the matrix; the norm bound is the largest singular value
    /// (inflated by a relative 1e-12 to absorb rounding in the SVD).
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(vec![rows, cols]));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                len: data.len(),
                shape: vec![rows, cols],
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        let m = nalgebra::DMatrix::from_row_slice(rows, cols, &data);
        let sigma = m.singular_values().max();
        Ok(Self {
            rows,
            cols,
            data,
            in_shape: [cols],
            out_shape: [rows],
            norm_bound: sigma * (1.0 + 1e-12),
            adjoint_override: None,
        })
    }

    /// Diagonal square matrix; its norm bound is `max |d_i|` exactly.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        let mut m = Self::new(n, n, data)?;
        m.norm_bound = diag.iter().fold(0.0, |a: f64, d| a.max(d.abs()));
        Ok(m)
    }

    /// Returns `A / sigma_max(A)`, whose norm bound is 1.
    pub fn normalized(&self) -> Self {
        let s = self.norm_bound / (1.0 + 1e-12);
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v /= s);
        out.norm_bound = 1.0;
        out
    }

    /// Same forward matrix, but the adjoint uses `adjoint` (cols x rows,
    /// row-major) instead of the transpose.
    pub fn with_adjoint(mut self, adjoint: Vec<f64>) -> Result<Self> {
        if adjoint.len() != self.rows * self.cols {
            return Err(Error::LengthMismatch {
                len: adjoint.len(),
                shape: vec![self.cols, self.rows],
            });
        }
        self.adjoint_override = Some(adjoint);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}

impl LinearMap for DenseMatrix {
    fn in_shape(&self) -> &[usize] {
        &self.in_shape
    }
    fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }
    fn apply(&self, x: &Tensor) -> Tensor {
        check_input(&self.in_shape, x);
        let xs = x.data();
        let out = self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect();
        Tensor::from_parts(&self.out_shape, out)
    }
    fn adjoint(&self, y: &Tensor) -> Tensor {
        check_input(&self.out_shape, y);
        let ys = y.data();
        let mut out = vec![0.0; self.cols];
        match &self.adjoint_override {
            Some(adj) => {
                for (o, row) in out.iter_mut().zip(adj.chunks_exact(self.rows)) {
                    *o = row.iter().zip(ys).map(|(a, b)| a * b).sum();
                }
            }
            None => {
                for (row, &yi) in self.data.chunks_exact(self.cols).zip(ys) {
                    for (o, &a) in out.iter_mut().zip(row) {
                        *o += a * yi;
                    }
                }
            }
        }
        Tensor::from_parts(&self.in_shape, out)
    }
    fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_adjoint_exact() {
        let id = Identity::new(&[7]).unwrap();
        assert_eq!(adjoint_test(&id, 10, 1), 0.0);
    }

    #[test]
    fn dense_two_by_two() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(adjoint_test(&a, 20, 3) <= 1e-12);
        let x = Tensor::vector(vec![1.0, -1.0]).unwrap();
        assert_eq!(a.apply(&x).data(), &[-1.0, -1.0]);
        assert_eq!(a.adjoint(&x).data(), &[-2.0, -2.0]);
    }

    #[test]
    fn wrong_adjoint_detected() {
        // transpose of [[1,2],[3,4]] is [[1,3],[2,4]]; perturb it
        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .with_adjoint(vec![1.0, 3.5, 2.0, 3.0])
            .unwrap();
        assert!(adjoint_test(&a, 20, 3) > 0.1);
    }

    #[test]
    fn dense_norm_bound_and_power_method() {
        let a = DenseMatrix::diagonal(&[3.0, -5.0, 1.0]).unwrap();
        assert_eq!(a.norm_bound(), 5.0);
        let est = power_method(&a, 100, 0);
        assert!(est <= a.norm_bound());
        assert!((est - 5.0).abs() < 1e-8);
        let n = a.normalized();
        assert_eq!(n.norm_bound(), 1.0);
        assert!((power_method(&n, 100, 0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dense_rejects_bad_input() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }
}
