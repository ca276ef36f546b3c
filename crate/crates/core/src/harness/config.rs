use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agents::Algorithm;
use crate::bandit::AcquisitionConfig;
use crate::context::{sample_instance_set, InstanceSet, Visibility};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::pb2::{HyperparamSpace, Pb2Config};
use crate::rng;

/// Number of contexts in a training instance set.
pub const DEFAULT_INSTANCES: usize = 100;

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub visibility: Visibility,
    /// Divide appended context values by their default magnitude.
    pub normalize_context: bool,
    pub population: usize,
    pub interval: u64,
    pub quantile: f64,
    /// Environment steps per member.
    pub total_steps: u64,
    pub seed: u64,
    pub hidden_width: usize,
    pub instances: usize,
    pub outdir: PathBuf,
    pub execution: Execution,
    pub asynchronous: bool,
    /// Fill the `wallclock_s` metrics column; off keeps outputs
    /// byte-reproducible.
    pub record_wallclock: bool,
    /// Starting hyperparameters; the space's initial point when absent.
    pub initial_hyperparams: Option<Vec<f64>>,
    pub acquisition: AcquisitionConfig,
}

impl RunConfig {
    pub fn new(env: EnvKind) -> Self {
        Self {
            env,
            algorithm: Algorithm::default_for(env),
            visibility: Visibility::Hidden,
            normalize_context: false,
            population: 8,
            interval: 4096,
            quantile: 0.25,
            total_steps: 4096 * 10,
            seed: 0,
            hidden_width: 64,
            instances: DEFAULT_INSTANCES,
            outdir: PathBuf::from("runs"),
            execution: Execution::default(),
            asynchronous: false,
            record_wallclock: false,
            initial_hyperparams: None,
            acquisition: AcquisitionConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.algorithm.supports(&self.env.spec().action) {
            return Err(Error::config(format!(
                "{} cannot drive the {} action space",
                self.algorithm, self.env
            )));
        }
        if self.hidden_width == 0 {
            return Err(Error::config("hidden width must be positive"));
        }
        if self.instances == 0 {
            return Err(Error::config("instance set must hold at least one context"));
        }
        if self.total_steps == 0 {
            return Err(Error::config("step budget must be positive"));
        }
        self.space()?;
        self.pb2().validate()
    }

    /// Hyperparameter box with this run's starting point.
    pub fn space(&self) -> Result<HyperparamSpace> {
        let space = HyperparamSpace::for_algorithm(self.algorithm);
        match &self.initial_hyperparams {
            Some(hp) => space
                .with_initial(hp.clone())
                .map_err(|e| Error::config(e.to_string())),
            None => Ok(space),
        }
    }

    pub fn pb2(&self) -> Pb2Config {
        Pb2Config {
            population: self.population,
            interval: self.interval,
            quantile: self.quantile,
            total_steps: self.total_steps,
            seed: rng::derive_seed(self.seed, "pb2", 0),
            acquisition: self.acquisition.clone(),
            execution: self.execution,
            asynchronous: self.asynchronous,
        }
    }

    /// The run's training contexts, drawn from the environment's default
    /// Gaussian over its varied feature.
    pub fn instance_set(&self) -> Result<InstanceSet> {
        let (feature, mu, sigma) = self.env.varied_feature();
        sample_instance_set(
            &feature,
            mu,
            sigma,
            self.instances,
            rng::derive_seed(self.seed, "instances", 0),
        )
    }

    /// Observation width the agents see.
    pub fn obs_dim(&self) -> usize {
        let base = self.env.spec().base_obs_dim;
        match self.visibility {
            Visibility::Hidden => base,
            Visibility::Visible => base + 1,
        }
    }

    /// Seed of member `i`'s networks and episodes.
    pub fn member_seed(&self, i: usize) -> u64 {
        rng::derive_seed(self.seed, "member", i as u64)
    }

    /// `n` evaluation seeds that never coincide with the training seed.
    pub fn default_eval_seeds(&self, n: usize) -> Vec<u64> {
        (0..n as u64)
            .map(|i| self.seed.wrapping_add(1000 + i))
            .collect()
    }
}
