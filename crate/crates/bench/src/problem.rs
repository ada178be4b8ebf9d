//! Imaging test problems and the train/test split of phantom seeds.

use std::sync::Arc;

use devopt_core::linear::SharedMap;
use devopt_core::objectives::{huber_tv, l1_of_orthogonal, least_squares};
use devopt_core::tensor::randn;
use devopt_core::transforms::{discrete_gradient, gaussian_blur, haar_wavelet, ray_transform, GridGeometry};
use devopt_core::{CompositeProblem, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, OperatorKind, ProblemKind};
use crate::error::Result;
use crate::phantom::phantom;

/// Operators shared by every problem of one configuration.
#[derive(Clone, Debug)]
pub struct Operators {
    pub forward: SharedMap,
    /// Discrete gradient for Huber-TV, orthogonal wavelet for the l1 problem.
    pub regularizer: SharedMap,
}

impl Operators {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let forward: SharedMap = match cfg.operator {
            OperatorKind::Ray => Arc::new(ray_transform(GridGeometry::covering(cfg.size, cfg.angles))?),
            OperatorKind::Blur => Arc::new(gaussian_blur(cfg.size, cfg.blur_sigma)?),
        };
        let regularizer: SharedMap = match cfg.problem {
            ProblemKind::HuberTv => Arc::new(discrete_gradient(cfg.size)?),
            ProblemKind::WaveletL1 => Arc::new(haar_wavelet(cfg.size, cfg.wavelet_levels)?),
        };
        Ok(Self { forward, regularizer })
    }
}

/// A test or training problem with its ground truth and starting point.
#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub truth: Tensor,
    pub problem: CompositeProblem,
    pub x0: Tensor,
}

/// `y = A truth + e` with white Gaussian `e` scaled to `noise * |A truth|`.
/// The noise stream is seeded separately from the phantom.
pub fn simulate_data(forward: &SharedMap, truth: &Tensor, noise: f64, seed: u64) -> Tensor {
    let clean = forward.apply(truth);
    let level = noise * clean.norm();
    if level == 0.0 {
        return clean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_65);
    let e = randn(clean.shape(), &mut rng);
    clean.add_scaled(level / e.norm(), &e)
}

/// Builds the objective for a given ground truth.
pub fn assemble(cfg: &ExperimentConfig, ops: &Operators, truth: Tensor, seed: u64) -> Result<Instance> {
    let y = simulate_data(&ops.forward, &truth, cfg.noise, seed);
    let f = least_squares(ops.forward.clone(), y.clone())?;
    let problem = match cfg.problem {
        ProblemKind::HuberTv => {
            let reg = huber_tv(ops.regularizer.clone(), cfg.lambda, cfg.delta)?;
            CompositeProblem::smooth(f, Some(reg), y)?
        }
        ProblemKind::WaveletL1 => {
            let g = l1_of_orthogonal(ops.regularizer.clone(), cfg.lambda, 1.0)?;
            CompositeProblem::forward_backward(f, g, y)?
        }
    };
    let x0 = Tensor::zeros(problem.shape())?;
    Ok(Instance {
        seed,
        truth,
        problem,
        x0,
    })
}

pub fn make_problem_with(cfg: &ExperimentConfig, ops: &Operators, seed: u64) -> Result<Instance> {
    let truth = phantom(cfg.size, &cfg.phantom, seed)?;
    assemble(cfg, ops, truth, seed)
}

pub fn make_problem(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    cfg.validate()?;
    make_problem_with(cfg, &Operators::build(cfg)?, seed)
}

fn mix(seed: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One seed in ten belongs to the held-out pool.
pub fn is_test_seed(seed: u64) -> bool {
    mix(seed) % 10 == 0
}

/// The first `count` held-out seeds at or above `base`.
pub fn test_seeds(base: u64, count: usize) -> Vec<u64> {
    (base..).filter(|&s| is_test_seed(s)).take(count).collect()
}

/// A uniformly drawn training seed.
pub fn train_seed(rng: &mut ChaCha8Rng) -> u64 {
    loop {
        let s: u64 = rng.random();
        if !is_test_seed(s) {
            return s;
        }
    }
}
