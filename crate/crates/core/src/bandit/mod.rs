//! Time-varying Gaussian-process bandit used to propose hyperparameters.
//!
//! Inputs are `(t, x)` with `x` in the unit box; a temporal forgetting
//! factor lets old rewards fade as the objective drifts during training.

mod acquisition;
mod gp;

pub use acquisition::{fit_and_suggest, incumbent, suggest, ucb, AcquisitionConfig, Kappa};
pub use gp::{GpModel, KernelParams, Observation, Posterior, MAX_OBSERVATIONS};
