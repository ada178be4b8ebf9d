//! Experiment harness for the deviation-based solvers: synthetic phantoms,
//! Huber-TV and wavelet-l1 reconstruction problems, training of the learned
//! rules, convergence curves against a best-known optimum and certificate
//! reports.

pub mod certify;
pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod phantom;
pub mod problem;
pub mod train;

pub use config::{ExperimentConfig, OperatorKind, PhantomKind, ProblemKind, Solver};
pub use error::{BenchError, Result};
pub use experiment::{reference_optimum, run_experiment, CurveRecord, ExperimentResult};
pub use problem::{make_problem, Instance, Operators};
pub use train::LearnedNets;
