//! Unsupervised training: minimize `F(x_N)` over sampled problems with Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learned::net::ConvNet;
use crate::learned::unroll::{fb_loss_and_grad, smooth_loss_and_grad};
use crate::nonsmooth::GammaSchedule;
use crate::objectives::CompositeProblem;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Unroll length is drawn uniformly from `min_unroll..=max_unroll`.
    pub min_unroll: usize,
    pub max_unroll: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            min_unroll: 10,
            max_unroll: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_unroll == 0 || self.min_unroll > self.max_unroll {
            return Err(Error::InvalidParameter(format!(
                "unroll range {}..={} is empty",
                self.min_unroll, self.max_unroll
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            b1: cfg.beta1,
            b2: cfg.beta2,
            eps: cfg.adam_eps,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.b1.powi(self.t);
        let c2 = 1.0 - self.b2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.b1 * *m + (1.0 - self.b1) * g;
            *v = self.b2 * *v + (1.0 - self.b2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// `F(x_N)` before each update.
    pub losses: Vec<f64>,
    pub unrolls: Vec<usize>,
}

/// Supplies the training problem for a step, with its starting point.
pub type Sampler<'a> = dyn FnMut(usize, &mut ChaCha8Rng) -> Result<(CompositeProblem, Tensor)> + 'a;

fn check_step(loss: f64, grads: &[&[f64]], step: usize, seed: u64) -> Result<()> {
    if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::TrainingDiverged { step, seed });
    }
    Ok(())
}

/// Trains the gradient-scheme network in place; `eps = None` trains
/// without the safeguard layer.
pub fn train_smooth(
    sampler: &mut Sampler<'_>,
    net: &mut ConvNet,
    eps: Option<f64>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net.param_count(), cfg);
    let mut report = TrainReport::default();
    for step in 0..cfg.steps {
        let (problem, x0) = sampler(step, &mut rng)?;
        let n = rng.random_range(cfg.min_unroll..=cfg.max_unroll);
        let (loss, grad) = smooth_loss_and_grad(&problem, net, eps, &x0, n)?;
        check_step(loss, &[&grad], step, cfg.seed)?;
        adam.step(net.params_mut(), &grad);
        report.losses.push(loss);
        report.unrolls.push(n);
    }
    Ok(report)
}

/// Trains both forward-backward networks in place; `kappa = None` trains
/// without the safeguard layers.
pub fn train_fb(
    sampler: &mut Sampler<'_>,
    first: &mut ConvNet,
    second: &mut ConvNet,
    kappa: Option<(f64, f64)>,
    gammas: &GammaSchedule,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam1 = Adam::new(first.param_count(), cfg);
    let mut adam2 = Adam::new(second.param_count(), cfg);
    let mut report = TrainReport::default();
    for step in 0..cfg.steps {
        let (problem, x0) = sampler(step, &mut rng)?;
        let n = rng.random_range(cfg.min_unroll..=cfg.max_unroll);
        let (loss, g1, g2) = fb_loss_and_grad(&problem, (first, second), kappa, gammas, &x0, n)?;
        check_step(loss, &[&g1, &g2], step, cfg.seed)?;
        adam1.step(first.params_mut(), &g1);
        adam2.step(second.params_mut(), &g2);
        report.losses.push(loss);
        report.unrolls.push(n);
    }
    Ok(report)
}
