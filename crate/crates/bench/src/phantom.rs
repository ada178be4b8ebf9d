//! Ground-truth images: seeded piecewise-constant phantoms or a graymap file.

use std::path::Path;

use devopt_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PhantomKind;
use crate::error::{BenchError, Result};

struct Ellipse {
    value: f64,
    a: f64,
    b: f64,
    cx: f64,
    cy: f64,
    phi: f64,
}

impl Ellipse {
    /// Whether `(x, y)` in `[-1, 1]^2` lies inside.
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (c * dx + s * dy) / self.a;
        let v = (-s * dx + c * dy) / self.b;
        u * u + v * v <= 1.0
    }
}

/// Pixel centres mapped to `[-1, 1]`, row index running top to bottom.
fn coords(n: usize, i: usize) -> f64 {
    (2.0 * i as f64 + 1.0) / n as f64 - 1.0
}

fn paint(n: usize, shapes: &[Ellipse], additive: bool) -> Result<Tensor> {
    let mut data = vec![0.0; n * n];
    for (r, row) in data.chunks_exact_mut(n).enumerate() {
        let y = -coords(n, r);
        for (c, px) in row.iter_mut().enumerate() {
            let x = coords(n, c);
            for e in shapes.iter().filter(|e| e.contains(x, y)) {
                *px = if additive { *px + e.value } else { e.value };
            }
            *px = px.clamp(0.0, 1.0);
        }
    }
    Ok(Tensor::image(n, n, data)?)
}

/// Modified Shepp-Logan head with seeded jitter of positions and contrasts.
pub fn shepp_like(n: usize, seed: u64) -> Result<Tensor> {
    const TABLE: [[f64; 6]; 10] = [
        [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
        [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
        [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
        [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
        [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
        [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
        [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
        [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
        [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
        [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: Vec<Ellipse> = TABLE
        .iter()
        .enumerate()
        .map(|(k, &[value, a, b, cx, cy, deg])| {
            // the outer two ellipses stay put so the skull ring survives
            let (j, c) = if k < 2 {
                (0.0, 1.0)
            } else {
                (0.03, rng.random_range(0.7..1.3))
            };
            Ellipse {
                value: value * c,
                a,
                b,
                cx: cx + rng.random_range(-1.0..=1.0) * j,
                cy: cy + rng.random_range(-1.0..=1.0) * j,
                phi: deg.to_radians(),
            }
        })
        .collect();
    paint(n, &shapes, true)
}

/// A body ellipse with a few overlapping organs of random contrast.
pub fn blobs(n: usize, seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes = vec![Ellipse {
        value: rng.random_range(0.15..0.35),
        a: rng.random_range(0.7..0.9),
        b: rng.random_range(0.55..0.8),
        cx: rng.random_range(-0.05..0.05),
        cy: rng.random_range(-0.05..0.05),
        phi: rng.random_range(-0.3..0.3),
    }];
    let organs = rng.random_range(3..=7);
    for _ in 0..organs {
        shapes.push(Ellipse {
            value: rng.random_range(0.0..=1.0),
            a: rng.random_range(0.08..0.35),
            b: rng.random_range(0.08..0.35),
            cx: rng.random_range(-0.5..0.5),
            cy: rng.random_range(-0.45..0.45),
            phi: rng.random_range(0.0..std::f64::consts::PI),
        });
    }
    paint(n, &shapes, false)
}

/// Reads an 8- or 16-bit graymap, scales intensities to `[0, 1]` and
/// resamples to `n x n` by nearest neighbour when the sizes differ.
pub fn ingest(path: &Path, n: usize) -> Result<Tensor> {
    let err = |message: String| BenchError::Image {
        path: path.display().to_string(),
        message,
    };
    let img = image::open(path).map_err(|e| err(e.to_string()))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(err("empty image".into()));
    }
    let mut data = Vec::with_capacity(n * n);
    for r in 0..n {
        let sr = r * h / n;
        for c in 0..n {
            let sc = c * w / n;
            data.push(f64::from(img.get_pixel(sc as u32, sr as u32)[0]) / f64::from(u16::MAX));
        }
    }
    Ok(Tensor::image(n, n, data)?)
}

pub fn phantom(n: usize, kind: &PhantomKind, seed: u64) -> Result<Tensor> {
    match kind {
        PhantomKind::SheppLike => shepp_like(n, seed),
        PhantomKind::Blobs => blobs(n, seed),
        PhantomKind::Ingest(path) => ingest(path, n),
    }
}
