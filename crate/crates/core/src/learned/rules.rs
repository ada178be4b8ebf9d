//! Trained networks wrapped as deviation rules for the trace-producing
//! solvers.

use crate::error::Result;
use crate::learned::net::ConvNet;
use crate::learned::tape::Tape;
use crate::learned::unroll::{self, FbVars};
use crate::nonsmooth::{FbContext, FbRule};
use crate::smooth::{SmoothRule, SmoothRuleInput};
use crate::tensor::Tensor;

/// Network rule for the gradient scheme. With `normalize` off, the raw
/// network output is used as the deviation and nothing keeps it feasible.
#[derive(Clone, Debug)]
pub struct LearnedSmoothRule {
    pub net: ConvNet,
    pub eps: f64,
    pub normalize: bool,
}

impl LearnedSmoothRule {
    pub fn new(net: ConvNet, eps: f64) -> Self {
        Self {
            net,
            eps,
            normalize: true,
        }
    }

    pub fn unnormalized(net: ConvNet, eps: f64) -> Self {
        Self {
            net,
            eps,
            normalize: false,
        }
    }
}

impl SmoothRule for LearnedSmoothRule {
    fn eps(&self, _n: usize) -> f64 {
        self.eps
    }

    fn propose(&mut self, input: &SmoothRuleInput<'_>) -> Result<Tensor> {
        let dims = unroll::image_dims(input.x.shape())?;
        let mut tape = Tape::new();
        let bound = self.net.bind(&mut tape)?;
        let x = tape.leaf(input.x);
        let gf = tape.leaf(input.grad_f);
        let gg = match input.grad_g {
            Some(g) => tape.leaf(g),
            None => tape.leaf(&Tensor::zeros_like(input.x)),
        };
        let prev = tape.leaf(input.prev_dev);
        let h = unroll::smooth_proposal(&mut tape, &self.net, &bound, x, gf, gg, prev, dims)?;
        let out = if self.normalize {
            let grad = tape.leaf(input.grad);
            unroll::normalize_smooth(&mut tape, h, grad, self.eps)?
        } else {
            h
        };
        Ok(tape.tensor(out))
    }
}

/// Pair of networks for the forward-backward scheme.
#[derive(Clone, Debug)]
pub struct LearnedFbRule {
    pub first: ConvNet,
    pub second: ConvNet,
    pub kappa: (f64, f64),
    pub normalize: bool,
}

impl LearnedFbRule {
    pub fn new(first: ConvNet, second: ConvNet, kappa: (f64, f64)) -> Self {
        Self {
            first,
            second,
            kappa,
            normalize: true,
        }
    }

    pub fn unnormalized(first: ConvNet, second: ConvNet, kappa: (f64, f64)) -> Self {
        Self {
            normalize: false,
            ..Self::new(first, second, kappa)
        }
    }
}

fn state_vars(tape: &mut Tape, ctx: &FbContext<'_>) -> FbVars {
    let s = ctx.state;
    FbVars {
        x: tape.leaf(&s.x),
        x_prev: tape.leaf(&s.x_prev),
        w_prev: tape.leaf(&s.w_prev),
        grad_w_prev: tape.leaf(&s.grad_w_prev),
        dev1_prev: tape.leaf(&s.dev1_prev),
        dev2_prev: tape.leaf(&s.dev2_prev),
        gamma_prev: s.gamma_prev,
    }
}

impl FbRule for LearnedFbRule {
    fn kappas(&self) -> (f64, f64) {
        self.kappa
    }

    fn propose_first(&mut self, ctx: &FbContext<'_>) -> Result<Tensor> {
        let dims = unroll::image_dims(ctx.state.x.shape())?;
        let mut tape = Tape::new();
        let bound = self.first.bind(&mut tape)?;
        let s = state_vars(&mut tape, ctx);
        let d = unroll::fb_first(&mut tape, &self.first, &bound, &s, ctx.beta, self.kappa.0, self.normalize, dims)?;
        Ok(tape.tensor(d))
    }

    fn propose_second(&mut self, ctx: &FbContext<'_>, dev1: &Tensor, grad_w: &Tensor) -> Result<Tensor> {
        let dims = unroll::image_dims(ctx.state.x.shape())?;
        let mut tape = Tape::new();
        let bound = self.second.bind(&mut tape)?;
        let s = state_vars(&mut tape, ctx);
        let d1 = tape.leaf(dev1);
        let gw = tape.leaf(grad_w);
        let d = unroll::fb_second(
            &mut tape,
            &self.second,
            &bound,
            &s,
            d1,
            gw,
            ctx.beta,
            ctx.gamma,
            self.kappa.1,
            self.normalize,
            dims,
        )?;
        Ok(tape.tensor(d))
    }
}
