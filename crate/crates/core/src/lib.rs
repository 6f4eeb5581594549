//! Sampling-based model-predictive control, two continuous-control
//! simulators, a small reverse-mode autodiff core, DAgger-style imitation
//! learning, and a differentiable path-integral planner, with a
//! robustness-sweep evaluator on top.

pub mod autodiff;
pub mod config;
pub mod dagger;
pub mod env;
pub mod mppi;
pub mod opt;
pub mod pinet;
pub mod policy;
pub mod report;
pub mod sweep;

mod seed;

pub use seed::derive_seed;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff::AdError),
    #[error(transparent)]
    Env(#[from] env::EnvError),
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("training diverged: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
