//! DDPG and PPO agents with hyperparameters that can be changed between
//! updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::envs::{Action, ActionKind, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::pb2::HyperparamSpace;

mod checkpoint;
pub mod ddpg;
mod gae;
pub mod ppo;
mod replay;

pub use checkpoint::Checkpoint;
pub use ddpg::{Ddpg, DdpgConfig};
pub use gae::compute_gae;
pub use ppo::{Ppo, PpoConfig, RolloutBuffer};
pub use replay::{ReplayBatch, ReplayBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ddpg,
    Ppo,
}

impl Algorithm {
    /// DDPG for the continuous pendulum, PPO for the discrete environments.
    pub fn default_for(env: EnvKind) -> Self {
        match env {
            EnvKind::Pendulum => Algorithm::Ddpg,
            EnvKind::Acrobot | EnvKind::Lander => Algorithm::Ppo,
        }
    }

    pub fn supports(self, action: &ActionKind) -> bool {
        matches!(
            (self, action),
            (Algorithm::Ddpg, ActionKind::ContinuousBox { .. })
                | (Algorithm::Ppo, ActionKind::Discrete { .. })
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Ppo => "ppo",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Algorithm::Ddpg),
            "ppo" => Ok(Algorithm::Ppo),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperDdpg {
    pub learning_rate: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl HyperDdpg {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.learning_rate, self.gamma, self.tau]
    }

    pub fn from_slice(hp: &[f64]) -> Result<Self> {
        HyperparamSpace::ddpg().validate(hp)?;
        Ok(Self {
            learning_rate: hp[0],
            gamma: hp[1],
            tau: hp[2],
        })
    }
}

impl Default for HyperDdpg {
    fn default() -> Self {
        Self::from_slice(HyperparamSpace::ddpg().initial()).expect("initial point in box")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPpo {
    pub learning_rate: f64,
    pub gamma: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub gae_lambda: f64,
}

impl HyperPpo {
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.learning_rate,
            self.gamma,
            self.ent_coef,
            self.vf_coef,
            self.max_grad_norm,
            self.gae_lambda,
        ]
    }

    pub fn from_slice(hp: &[f64]) -> Result<Self> {
        HyperparamSpace::ppo().validate(hp)?;
        Ok(Self {
            learning_rate: hp[0],
            gamma: hp[1],
            ent_coef: hp[2],
            vf_coef: hp[3],
            max_grad_norm: hp[4],
            gae_lambda: hp[5],
        })
    }
}

impl Default for HyperPpo {
    fn default() -> Self {
        Self::from_slice(HyperparamSpace::ppo().initial()).expect("initial point in box")
    }
}

/// What the agent chose, plus what it needs to remember about the choice.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Log-probability under the behaviour policy (PPO only).
    pub log_prob: f64,
    /// Value estimate of the observation (PPO only).
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Transition<'a> {
    pub obs: &'a [f64],
    pub decision: &'a Decision,
    pub reward: f64,
    pub next_obs: &'a [f64],
    pub terminated: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub losses: BTreeMap<String, f64>,
}

/// A learning agent driven one environment step at a time.
pub trait Learner: Send + Sync {
    fn algorithm(&self) -> Algorithm;

    fn obs_dim(&self) -> usize;

    /// Exploratory action for training.
    fn act(&mut self, obs: &[f64]) -> Result<Decision>;

    /// Deterministic action for evaluation.
    fn act_greedy(&self, obs: &[f64]) -> Result<Action>;

    /// Stores a transition and runs whatever updates are due.
    fn observe(&mut self, t: Transition<'_>) -> Result<Option<UpdateReport>>;

    /// Current hyperparameters in [`HyperparamSpace`] order.
    fn hyperparams(&self) -> Vec<f64>;

    /// Takes effect from the next update; optimizer moments are kept.
    fn set_hyperparams(&mut self, hp: &[f64]) -> Result<()>;

    fn checkpoint(&self) -> Checkpoint;

    /// Replaces weights and optimizer state with the checkpoint's. The
    /// agent's own hyperparameters, replay data and RNG are kept; any
    /// partially collected on-policy data is discarded.
    fn load_state(&mut self, ckpt: &Checkpoint) -> Result<()>;

    /// Number of gradient updates performed so far.
    fn updates(&self) -> u64;
}

/// Builds a fresh learner for `spec` with `obs_dim` inputs.
pub fn make_learner(
    algorithm: Algorithm,
    spec: &EnvSpec,
    obs_dim: usize,
    hidden_width: usize,
    hp: &[f64],
    seed: u64,
) -> Result<Box<dyn Learner>> {
    if !algorithm.supports(&spec.action) {
        return Err(Error::config(format!(
            "{algorithm} cannot drive the action space of {}",
            spec.name
        )));
    }
    match (algorithm, &spec.action) {
        (Algorithm::Ddpg, &ActionKind::ContinuousBox { dim, low, high }) => {
            let cfg = DdpgConfig {
                hidden: vec![hidden_width; 2],
                ..DdpgConfig::default()
            };
            Ok(Box::new(Ddpg::new(
                obs_dim,
                dim,
                (low, high),
                cfg,
                HyperDdpg::from_slice(hp)?,
                seed,
            )?))
        }
        (Algorithm::Ppo, &ActionKind::Discrete { n }) => {
            let cfg = PpoConfig {
                hidden: vec![hidden_width; 2],
                ..PpoConfig::default()
            };
            Ok(Box::new(Ppo::new(
                obs_dim,
                n,
                cfg,
                HyperPpo::from_slice(hp)?,
                seed,
            )?))
        }
        _ => unreachable!("pairing checked above"),
    }
}
