//! Population-based bandit hyperparameter tuning for contextual
//! classic-control reinforcement learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`context`]: physics-parameter contexts, Gaussian instance sets and
//!   observation augmentation.
//! * [`envs`]: contextual Pendulum, Acrobot and a simplified Lander.
//! * [`nn`]: dense networks with reverse-mode gradients, Adam and global
//!   gradient-norm clipping.
//! * [`agents`]: DDPG and PPO with live-settable hyperparameters.
//! * [`bandit`]: the time-varying GP-UCB used to pick new hyperparameters.
//! * [`pb2`]: the population scheduler (exploit/explore, schedules).
//! * [`harness`]: training runs, schedule replay, evaluation, plots.

pub mod agents;
pub mod bandit;
pub mod context;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod parallel;
pub mod pb2;
pub mod rng;

pub use error::{Error, Result};
