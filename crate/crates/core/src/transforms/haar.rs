use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linear::{check_input, LinearMap};
use crate::tensor::Tensor;

/// Multi-level orthogonal Haar analysis on a length-`n` vector or an `n x n`
/// image. Coefficients are stored in place, coarse approximation first. The
/// adjoint is the synthesis (inverse), so `W W^T = Id` and `mu = 1`.
#[derive(Clone, Debug)]
pub struct HaarWavelet {
    n: usize,
    levels: usize,
    shape: Vec<usize>,
}

fn check(n: usize, levels: usize) -> Result<()> {
    if levels == 0 || n == 0 || n % (1usize << levels) != 0 {
        return Err(Error::InvalidParameter(format!(
            "haar wavelet: n = {n} must be divisible by 2^levels (levels = {levels})"
        )));
    }
    Ok(())
}

pub fn haar_wavelet(n: usize, levels: usize) -> Result<HaarWavelet> {
    check(n, levels)?;
    Ok(HaarWavelet {
        n,
        levels,
        shape: vec![n, n],
    })
}

pub fn haar_wavelet_1d(n: usize, levels: usize) -> Result<HaarWavelet> {
    check(n, levels)?;
    Ok(HaarWavelet {
        n,
        levels,
        shape: vec![n],
    })
}

/// One analysis step on `len` samples read with `stride`.
fn analyze(buf: &mut [f64], start: usize, stride: usize, len: usize, tmp: &mut Vec<f64>) {
    tmp.clear();
    tmp.extend((0..len).map(|k| buf[start + k * stride]));
    let half = len / 2;
    for k in 0..half {
        let (a, b) = (tmp[2 * k], tmp[2 * k + 1]);
        buf[start + k * stride] = (a + b) * FRAC_1_SQRT_2;
        buf[start + (half + k) * stride] = (a - b) * FRAC_1_SQRT_2;
    }
}

fn synthesize(buf: &mut [f64], start: usize, stride: usize, len: usize, tmp: &mut Vec<f64>) {
    tmp.clear();
    tmp.extend((0..len).map(|k| buf[start + k * stride]));
    let half = len / 2;
    for k in 0..half {
        let (a, d) = (tmp[k], tmp[half + k]);
        buf[start + 2 * k * stride] = (a + d) * FRAC_1_SQRT_2;
        buf[start + (2 * k + 1) * stride] = (a - d) * FRAC_1_SQRT_2;
    }
}

impl HaarWavelet {
    pub fn levels(&self) -> usize {
        self.levels
    }

    fn forward(&self, data: &mut [f64]) {
        let n = self.n;
        let mut tmp = Vec::with_capacity(n);
        for level in 0..self.levels {
            let m = n >> level;
            if self.shape.len() == 1 {
                analyze(data, 0, 1, m, &mut tmp);
            } else {
                for r in 0..m {
                    analyze(data, r * n, 1, m, &mut tmp);
                }
                for c in 0..m {
                    analyze(data, c, n, m, &mut tmp);
                }
            }
        }
    }

    fn inverse(&self, data: &mut [f64]) {
        let n = self.n;
        let mut tmp = Vec::with_capacity(n);
        for level in (0..self.levels).rev() {
            let m = n >> level;
            if self.shape.len() == 1 {
                synthesize(data, 0, 1, m, &mut tmp);
            } else {
                for c in 0..m {
                    synthesize(data, c, n, m, &mut tmp);
                }
                for r in 0..m {
                    synthesize(data, r * n, 1, m, &mut tmp);
                }
            }
        }
    }
}

impl LinearMap for HaarWavelet {
    fn in_shape(&self) -> &[usize] {
        &self.shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.shape
    }

    fn apply(&self, x: &Tensor) -> Tensor {
        check_input(&self.shape, x);
        let mut out = x.clone();
        self.forward(out.data_mut());
        out
    }

    fn adjoint(&self, y: &Tensor) -> Tensor {
        check_input(&self.shape, y);
        let mut out = y.clone();
        self.inverse(out.data_mut());
        out
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_detail() {
        let w = haar_wavelet(16, 3).unwrap();
        let c = w.apply(&Tensor::filled(&[16, 16], 2.0).unwrap());
        // the 2x2 approximation block carries everything
        for i in 0..16 {
            for j in 0..16 {
                if i >= 2 || j >= 2 {
                    assert!(c.at(i, j).abs() < 1e-12, "detail ({i},{j}) = {}", c.at(i, j));
                }
            }
        }
        assert!((c.norm() - 32.0).abs() < 1e-10);
    }

    #[test]
    fn four_sample_one_level() {
        let w = haar_wavelet_1d(4, 1).unwrap();
        let x = Tensor::vector(vec![1.0, 3.0, 2.0, 2.0]).unwrap();
        let c = w.apply(&x);
        let s = FRAC_1_SQRT_2;
        let expect = [4.0 * s, 4.0 * s, -2.0 * s, 0.0];
        for (a, b) in c.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn divisibility_enforced() {
        assert!(haar_wavelet(12, 3).is_err());
        assert!(haar_wavelet(12, 2).is_ok());
        assert!(haar_wavelet_1d(6, 2).is_err());
    }
}
