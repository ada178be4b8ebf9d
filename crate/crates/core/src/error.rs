use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("invalid shape {0:?}: only 1-D and 2-D tensors with positive extents are supported")]
    InvalidShape(Vec<usize>),

    #[error("tensor data length {len} does not match shape {shape:?}")]
    LengthMismatch { len: usize, shape: Vec<usize> },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not orthogonal: |W W^T y - mu y| / |y| = {residual:e}")]
    NotOrthogonal { residual: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("feasibility bound is undefined at n = 0")]
    NoHistory,

    #[error("solver state became non-finite at iteration {iteration} ({what})")]
    Diverged { iteration: usize, what: String },

    #[error("autodiff graph: {0}")]
    Graph(String),

    #[error("training loss became non-finite at step {step} (seed {seed})")]
    TrainingDiverged { step: usize, seed: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
