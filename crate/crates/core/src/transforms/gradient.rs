use crate::error::{Error, Result};
use crate::linear::{check_input, LinearMap};
use crate::tensor::Tensor;

/// Forward differences of an `n x n` image, stacked as a `2n x n` tensor:
/// rows `0..n` hold vertical differences `x[i+1,j] - x[i,j]`, rows `n..2n`
/// horizontal differences `x[i,j+1] - x[i,j]`. Differences leaving the image
/// are zero (Neumann boundary), so `|D|^2 <= 8`.
#[derive(Clone, Debug)]
pub struct DiscreteGradient {
    n: usize,
    in_shape: [usize; 2],
    out_shape: [usize; 2],
}

pub fn discrete_gradient(n: usize) -> Result<DiscreteGradient> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("discrete_gradient needs n >= 2, got {n}")));
    }
    Ok(DiscreteGradient {
        n,
        in_shape: [n, n],
        out_shape: [2 * n, n],
    })
}

impl LinearMap for DiscreteGradient {
    fn in_shape(&self) -> &[usize] {
        &self.in_shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }

    fn apply(&self, x: &Tensor) -> Tensor {
        check_input(&self.in_shape, x);
        let n = self.n;
        let xs = x.data();
        let mut out = vec![0.0; 2 * n * n];
        let (vert, horiz) = out.split_at_mut(n * n);
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                if i + 1 < n {
                    vert[k] = xs[k + n] - xs[k];
                }
                if j + 1 < n {
                    horiz[k] = xs[k + 1] - xs[k];
                }
            }
        }
        Tensor::from_parts(&self.out_shape, out)
    }

    fn adjoint(&self, y: &Tensor) -> Tensor {
        check_input(&self.out_shape, y);
        let n = self.n;
        let (vert, horiz) = y.data().split_at(n * n);
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let mut acc = 0.0;
                if i + 1 < n {
                    acc -= vert[k];
                }
                if i > 0 {
                    acc += vert[k - n];
                }
                if j + 1 < n {
                    acc -= horiz[k];
                }
                if j > 0 {
                    acc += horiz[k - 1];
                }
                out[k] = acc;
            }
        }
        Tensor::from_parts(&self.in_shape, out)
    }

    fn norm_bound(&self) -> f64 {
        8f64.sqrt()
    }
}
