use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linear::{check_input, power_method, LinearMap};
use crate::tensor::Tensor;

use super::sparse::CsrMatrix;

/// Image grid and parallel-beam acquisition geometry.
///
/// Pixels have unit size; detector bins are spaced `detector_spacing` apart
/// and centred on the rotation axis. Angles are `k * pi / angles`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridGeometry {
    pub n: usize,
    pub angles: usize,
    pub detectors: usize,
    pub detector_spacing: f64,
}

impl GridGeometry {
    /// Geometry with enough unit-spaced detectors to cover the image diagonal.
    pub fn covering(n: usize, angles: usize) -> Self {
        let detectors = ((n as f64) * 2f64.sqrt()).ceil() as usize + 1;
        Self {
            n,
            angles,
            detectors,
            detector_spacing: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::DegenerateGeometry(format!("grid n = {} < 4", self.n)));
        }
        if self.angles == 0 || self.detectors == 0 {
            return Err(Error::DegenerateGeometry("need at least one angle and one detector".into()));
        }
        if !(self.detector_spacing > 0.0 && self.detector_spacing.is_finite()) {
            return Err(Error::DegenerateGeometry("detector spacing must be positive".into()));
        }
        Ok(())
    }
}

/// Parallel-beam line integrals as an explicit sparse matrix (Joseph's
/// interpolation: one linear interpolation per image row or column crossed).
#[derive(Clone, Debug)]
pub struct RayTransform {
    geometry: GridGeometry,
    forward: CsrMatrix,
    backward: CsrMatrix,
    in_shape: [usize; 2],
    out_shape: [usize; 2],
    norm_bound: f64,
}

/// Iterations and seed of the power method used to normalize `A`.
pub const NORMALIZE_ITERS: usize = 100;
pub const NORMALIZE_SEED: u64 = 0x5a5a;
/// Relative head-room added to the power-method estimate before dividing,
/// since the estimate approaches the norm from below.
pub const NORMALIZE_MARGIN: f64 = 1e-6;

fn joseph_rows(g: &GridGeometry) -> Vec<Vec<(usize, f64)>> {
    let n = g.n;
    let c = (n as f64 - 1.0) / 2.0;
    let mut rows = Vec::with_capacity(g.angles * g.detectors);
    for a in 0..g.angles {
        let phi = a as f64 * PI / g.angles as f64;
        let (sin, cos) = phi.sin_cos();
        for d in 0..g.detectors {
            let s = (d as f64 - (g.detectors as f64 - 1.0) / 2.0) * g.detector_spacing;
            let mut row = Vec::new();
            let mut push = |i: usize, j_coord: f64, w: f64, row_major: bool| {
                let j0 = j_coord.floor();
                let frac = j_coord - j0;
                for (jj, wt) in [(j0, 1.0 - frac), (j0 + 1.0, frac)] {
                    if wt > 0.0 && jj >= 0.0 && (jj as usize) < n {
                        let idx = if row_major {
                            i * n + jj as usize
                        } else {
                            jj as usize * n + i
                        };
                        row.push((idx, w * wt));
                    }
                }
            };
            if cos.abs() >= sin.abs() {
                // march over image rows
                for i in 0..n {
                    let y = c - i as f64;
                    let t = (y - s * sin) / cos;
                    let x = s * cos - t * sin;
                    push(i, x + c, 1.0 / cos.abs(), true);
                }
            } else {
                for j in 0..n {
                    let x = j as f64 - c;
                    let t = (s * cos - x) / sin;
                    let y = s * sin + t * cos;
                    push(j, c - y, 1.0 / sin.abs(), false);
                }
            }
            rows.push(row);
        }
    }
    rows
}

impl RayTransform {
    /// The raw projector with unit pixel size (not normalized).
    pub fn unnormalized(geometry: GridGeometry) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.n;
        let forward = CsrMatrix::from_rows(n * n, joseph_rows(&geometry));
        let backward = forward.transpose();
        let total: f64 = (0..forward.rows()).flat_map(|r| forward.row(r).map(|(_, v)| v)).sum();
        if total == 0.0 {
            return Err(Error::DegenerateGeometry("no ray intersects the image".into()));
        }
        // |A|_2 <= sqrt(|A|_1 |A|_inf)
        let max_row = (0..forward.rows())
            .map(|r| forward.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let max_col = (0..backward.rows())
            .map(|r| backward.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self {
            in_shape: [n, n],
            out_shape: [geometry.angles, geometry.detectors],
            geometry,
            forward,
            backward,
            norm_bound: (max_row * max_col).sqrt(),
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.forward
    }

    /// Divides the matrix by its power-method norm estimate (with a small
    /// margin) and declares `norm_bound = 1`.
    pub fn normalized(mut self) -> Self {
        let est = power_method(&self, NORMALIZE_ITERS, NORMALIZE_SEED);
        let s = 1.0 / (est * (1.0 + NORMALIZE_MARGIN));
        self.forward.scale(s);
        self.backward.scale(s);
        self.norm_bound = 1.0;
        self
    }
}

/// Normalized parallel-beam ray transform, `|A| = 1`.
pub fn ray_transform(geometry: GridGeometry) -> Result<RayTransform> {
    Ok(RayTransform::unnormalized(geometry)?.normalized())
}

impl LinearMap for RayTransform {
    fn in_shape(&self) -> &[usize] {
        &self.in_shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }

    fn apply(&self, x: &Tensor) -> Tensor {
        check_input(&self.in_shape, x);
        Tensor::from_parts(&self.out_shape, self.forward.matvec(x.data()))
    }

    fn adjoint(&self, y: &Tensor) -> Tensor {
        check_input(&self.out_shape, y);
        Tensor::from_parts(&self.in_shape, self.backward.matvec(y.data()))
    }

    fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}
