//! Training the learned rules on problems drawn from the training pool.

use devopt_core::learned::{
    train_fb, train_smooth, Checkpoint, ConvNet, TrainConfig, TrainReport, FB_FIRST_CHANNELS,
    FB_SECOND_CHANNELS, SMOOTH_CHANNELS,
};
use devopt_core::nonsmooth::GammaSchedule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::problem::{make_problem_with, train_seed, Operators};

/// Trained networks available to an experiment.
#[derive(Clone, Debug, Default)]
pub struct LearnedNets {
    pub smooth: Option<ConvNet>,
    pub fb: Option<(ConvNet, ConvNet)>,
    /// Networks trained without the safeguard layers.
    pub smooth_raw: Option<ConvNet>,
    pub fb_raw: Option<(ConvNet, ConvNet)>,
}

impl LearnedNets {
    pub fn from_checkpoint(ck: Checkpoint) -> Self {
        match ck {
            Checkpoint::Smooth { net, .. } => Self {
                smooth: Some(net),
                ..Self::default()
            },
            Checkpoint::ForwardBackward { first, second, .. } => Self {
                fb: Some((first, second)),
                ..Self::default()
            },
        }
    }
}

pub fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        steps: cfg.train_steps,
        seed: cfg.train_seed,
        ..TrainConfig::default()
    }
}

/// Step sizes of the forward-backward runs: the configured `gamma` or `beta`.
pub fn gammas(cfg: &ExperimentConfig, beta: f64) -> GammaSchedule {
    GammaSchedule::Constant(cfg.gamma.unwrap_or(beta))
}

fn init_rng(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.train_seed ^ 0x1e4_2d17)
}

fn sampler<'a>(
    cfg: &'a ExperimentConfig,
    ops: &'a Operators,
) -> impl FnMut(usize, &mut ChaCha8Rng) -> devopt_core::Result<(devopt_core::CompositeProblem, devopt_core::Tensor)> + 'a
{
    move |_, rng| {
        let inst = make_problem_with(cfg, ops, train_seed(rng))
            .map_err(|e| devopt_core::Error::InvalidParameter(e.to_string()))?;
        Ok((inst.problem, inst.x0))
    }
}

/// Trains the gradient-scheme network; `safeguard = false` trains the raw
/// variant.
pub fn train_smooth_net(
    cfg: &ExperimentConfig,
    ops: &Operators,
    safeguard: bool,
) -> Result<(ConvNet, TrainReport)> {
    if !cfg.is_smooth() {
        return Err(BenchError::Invalid("gradient-scheme training needs huber_tv".into()));
    }
    let mut net = ConvNet::new(SMOOTH_CHANNELS, &mut init_rng(cfg))?;
    let mut s = sampler(cfg, ops);
    let eps = safeguard.then_some(cfg.eps);
    let report = train_smooth(&mut s, &mut net, eps, &train_config(cfg))?;
    Ok((net, report))
}

pub fn train_fb_nets(
    cfg: &ExperimentConfig,
    ops: &Operators,
    safeguard: bool,
) -> Result<((ConvNet, ConvNet), TrainReport)> {
    if cfg.is_smooth() {
        return Err(BenchError::Invalid("forward-backward training needs wavelet_l1".into()));
    }
    let mut rng = init_rng(cfg);
    let mut first = ConvNet::new(FB_FIRST_CHANNELS, &mut rng)?;
    let mut second = ConvNet::new(FB_SECOND_CHANNELS, &mut rng)?;
    // beta of the data term: A is normalized, so 1/beta = 2
    let beta = make_problem_with(cfg, ops, 0)?.problem.f.beta();
    let kappa = safeguard.then_some((cfg.kappa_a, cfg.kappa_b));
    let mut s = sampler(cfg, ops);
    let report = train_fb(&mut s, &mut first, &mut second, kappa, &gammas(cfg, beta), &train_config(cfg))?;
    Ok(((first, second), report))
}

/// Trains every network the configured solvers need.
pub fn train_for(cfg: &ExperimentConfig, ops: &Operators) -> Result<LearnedNets> {
    use crate::config::Solver;
    let mut nets = LearnedNets::default();
    let wants = |s: Solver| cfg.solvers.contains(&s);
    if cfg.is_smooth() {
        if wants(Solver::Learned) {
            nets.smooth = Some(train_smooth_net(cfg, ops, true)?.0);
        }
        if wants(Solver::LearnedUnnormalized) {
            nets.smooth_raw = Some(train_smooth_net(cfg, ops, false)?.0);
        }
    } else {
        if wants(Solver::Learned) {
            nets.fb = Some(train_fb_nets(cfg, ops, true)?.0);
        }
        if wants(Solver::LearnedUnnormalized) {
            nets.fb_raw = Some(train_fb_nets(cfg, ops, false)?.0);
        }
    }
    Ok(nets)
}

/// The safeguarded network(s) as a parameter file.
pub fn checkpoint(cfg: &ExperimentConfig, nets: &LearnedNets) -> Result<Checkpoint> {
    let missing = || BenchError::Missing("no safeguarded network was trained".into());
    Ok(if cfg.is_smooth() {
        Checkpoint::Smooth {
            net: nets.smooth.clone().ok_or_else(missing)?,
            eps: cfg.eps,
            seed: cfg.train_seed,
        }
    } else {
        let (first, second) = nets.fb.clone().ok_or_else(missing)?;
        Checkpoint::ForwardBackward {
            first,
            second,
            kappa: (cfg.kappa_a, cfg.kappa_b),
            seed: cfg.train_seed,
        }
    })
}
