//! Learned deviation rules: a small convolutional network, the safeguard
//! layers that make its output feasible, a tape for differentiating unrolled
//! solvers, and the training loop.

pub mod checkpoint;
pub mod net;
pub mod normalize;
pub mod rules;
pub mod tape;
pub mod train;
pub mod unroll;

pub use checkpoint::Checkpoint;
pub use net::ConvNet;
pub use normalize::{normalize_fb, normalize_smooth, squash};
pub use rules::{LearnedFbRule, LearnedSmoothRule};
pub use tape::{Tape, Var};
pub use train::{train_fb, train_smooth, TrainConfig, TrainReport};
pub use unroll::{fb_loss_and_grad, smooth_loss_and_grad};

/// Input channels of the gradient-scheme network: `x, grad f, grad g, previous deviation`.
pub const SMOOTH_CHANNELS: usize = 4;
/// Input channels of the first forward-backward network: `x_n, grad f(w_{n-1}), dx1_{n-1}`.
pub const FB_FIRST_CHANNELS: usize = 3;
/// Input channels of the second network: `x_n, grad f(w_{n-1}), dx2_{n-1}, dx1_n`.
pub const FB_SECOND_CHANNELS: usize = 4;
