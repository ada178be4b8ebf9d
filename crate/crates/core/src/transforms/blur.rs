use crate::error::{Error, Result};
use crate::linear::{check_input, LinearMap};
use crate::tensor::Tensor;

/// Separable truncated Gaussian blur of an `n x n` image with zero padding.
/// The kernel sums to one, so the operator norm is at most 1; the kernel is
/// symmetric, so the operator is self-adjoint.
#[derive(Clone, Debug)]
pub struct GaussianBlur {
    n: usize,
    kernel: Vec<f64>,
    shape: [usize; 2],
}

pub fn gaussian_blur(n: usize, sigma: f64) -> Result<GaussianBlur> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("blur sigma must be positive, got {sigma}")));
    }
    if n == 0 {
        return Err(Error::InvalidShape(vec![n, n]));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= total);
    Ok(GaussianBlur {
        n,
        kernel,
        shape: [n, n],
    })
}

impl GaussianBlur {
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn radius(&self) -> isize {
        (self.kernel.len() / 2) as isize
    }

    fn convolve(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n as isize;
        let r = self.radius();
        let mut rows = vec![0.0; x.len()];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in -r..=r {
                    let jj = j + k;
                    if (0..n).contains(&jj) {
                        acc += self.kernel[(k + r) as usize] * x[(i * n + jj) as usize];
                    }
                }
                rows[(i * n + j) as usize] = acc;
            }
        }
        let mut out = vec![0.0; x.len()];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in -r..=r {
                    let ii = i + k;
                    if (0..n).contains(&ii) {
                        acc += self.kernel[(k + r) as usize] * rows[(ii * n + j) as usize];
                    }
                }
                out[(i * n + j) as usize] = acc;
            }
        }
        out
    }
}

impl LinearMap for GaussianBlur {
    fn in_shape(&self) -> &[usize] {
        &self.shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.shape
    }

    fn apply(&self, x: &Tensor) -> Tensor {
        check_input(&self.shape, x);
        Tensor::from_parts(&self.shape, self.convolve(x.data()))
    }

    fn adjoint(&self, y: &Tensor) -> Tensor {
        check_input(&self.shape, y);
        Tensor::from_parts(&self.shape, self.convolve(y.data()))
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }
}
