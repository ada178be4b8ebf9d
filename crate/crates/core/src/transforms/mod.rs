//! Concrete linear maps: forward-difference gradient, orthogonal Haar
//! wavelets, Gaussian blur and a parallel-beam ray transform.

mod blur;
mod gradient;
mod haar;
mod ray;
mod sparse;

pub use blur::{gaussian_blur, GaussianBlur};
pub use gradient::{discrete_gradient, DiscreteGradient};
pub use haar::{haar_wavelet, haar_wavelet_1d, HaarWavelet};
pub use ray::{ray_transform, GridGeometry, RayTransform};
pub use sparse::CsrMatrix;
