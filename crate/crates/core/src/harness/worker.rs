use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{make_learner, Checkpoint, Learner, Transition};
use crate::context::{
    augment_observation, augment_observation_normalized, Context, InstanceSet, Visibility,
};
use crate::envs::{EnvKind, Environment};
use crate::error::{Error, Result};
use crate::pb2::Member;
use crate::rng;

/// How observations are built from the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationMode {
    pub visibility: Visibility,
    pub normalize_context: bool,
}

impl ObservationMode {
    pub fn hidden() -> Self {
        Self {
            visibility: Visibility::Hidden,
            normalize_context: false,
        }
    }

    pub fn augment(&self, kind: EnvKind, obs: &[f64], ctx: &Context) -> Vec<f64> {
        if self.normalize_context {
            augment_observation_normalized(obs, ctx, self.visibility, &kind.spec().features)
        } else {
            augment_observation(obs, ctx, self.visibility)
        }
    }
}

/// One finished training episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Worker step count when the episode ended.
    pub end_step: u64,
    pub episode_return: f64,
    pub length: u64,
    /// Index of the context in the instance set.
    pub instance: usize,
}

/// An agent interacting with one environment over a shared instance set,
/// one context per episode in round-robin order.
pub struct Worker {
    kind: EnvKind,
    mode: ObservationMode,
    env: Box<dyn Environment>,
    learner: Box<dyn Learner>,
    instances: Arc<InstanceSet>,
    seed: u64,
    episode: u64,
    steps: u64,
    obs: Vec<f64>,
    ctx: Context,
    episode_return: f64,
    episode_length: u64,
    episodes: Vec<EpisodeRecord>,
}

impl Worker {
    pub fn new(
        kind: EnvKind,
        mode: ObservationMode,
        instances: Arc<InstanceSet>,
        hidden_width: usize,
        initial_hp: &[f64],
        seed: u64,
    ) -> Result<Self> {
        let spec = kind.spec();
        let obs_dim = spec.base_obs_dim
            + match mode.visibility {
                Visibility::Hidden => 0,
                Visibility::Visible => 1,
            };
        let learner = make_learner(
            crate::agents::Algorithm::default_for(kind),
            &spec,
            obs_dim,
            hidden_width,
            initial_hp,
            rng::derive_seed(seed, "learner", 0),
        )?;
        Self::with_learner(kind, mode, instances, learner, seed)
    }

    /// Wraps an existing learner.
    pub fn with_learner(
        kind: EnvKind,
        mode: ObservationMode,
        instances: Arc<InstanceSet>,
        learner: Box<dyn Learner>,
        seed: u64,
    ) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::config("worker needs at least one context"));
        }
        let mut w = Self {
            kind,
            mode,
            env: kind.make(),
            learner,
            instances,
            seed,
            episode: 0,
            steps: 0,
            obs: Vec::new(),
            ctx: Context::empty(),
            episode_return: 0.0,
            episode_length: 0,
            episodes: Vec::new(),
        };
        w.begin_episode()?;
        if w.obs.len() != w.learner.obs_dim() {
            return Err(Error::config(format!(
                "learner expects {} inputs, environment gives {}",
                w.learner.obs_dim(),
                w.obs.len()
            )));
        }
        Ok(w)
    }

    fn begin_episode(&mut self) -> Result<()> {
        self.ctx = self.instances.round_robin(self.episode).clone();
        let base = self.env.reset(
            &self.ctx,
            rng::derive_seed(self.seed, "episode", self.episode),
        )?;
        self.obs = self.mode.augment(self.kind, &base, &self.ctx);
        self.episode_return = 0.0;
        self.episode_length = 0;
        Ok(())
    }

    /// One environment step, with learning.
    pub fn step(&mut self) -> Result<()> {
        let decision = self.learner.act(&self.obs)?;
        let r = self.env.step(&decision.action)?;
        if !r.reward.is_finite() || r.obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "{} produced a non-finite step",
                self.kind
            )));
        }
        let next = self.mode.augment(self.kind, &r.obs, &self.ctx);
        self.learner.observe(Transition {
            obs: &self.obs,
            decision: &decision,
            reward: r.reward,
            next_obs: &next,
            terminated: r.terminated,
            truncated: r.truncated,
        })?;
        self.steps += 1;
        self.episode_return += r.reward;
        self.episode_length += 1;
        if r.done() {
            self.episodes.push(EpisodeRecord {
                end_step: self.steps,
                episode_return: self.episode_return,
                length: self.episode_length,
                instance: (self.episode % self.instances.len() as u64) as usize,
            });
            self.episode += 1;
            self.begin_episode()?;
        } else {
            self.obs = next;
        }
        Ok(())
    }

    /// Trains for `steps` steps and returns the interval score: the mean
    /// return of episodes finished in the interval, or the running
    /// episode's partial return if none finished.
    pub fn run_interval(&mut self, steps: u64) -> Result<f64> {
        let before = self.episodes.len();
        for _ in 0..steps {
            self.step()?;
        }
        let done = &self.episodes[before..];
        if done.is_empty() {
            Ok(self.episode_return)
        } else {
            Ok(done.iter().map(|e| e.episode_return).sum::<f64>() / done.len() as f64)
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    pub fn learner(&self) -> &dyn Learner {
        self.learner.as_ref()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.len()
    }
}

impl Member for Worker {
    fn train(&mut self, steps: u64) -> Result<f64> {
        self.run_interval(steps)
    }

    fn hyperparams(&self) -> Vec<f64> {
        self.learner.hyperparams()
    }

    fn set_hyperparams(&mut self, hp: &[f64]) -> Result<()> {
        self.learner.set_hyperparams(hp)
    }

    fn checkpoint(&self) -> Checkpoint {
        self.learner.checkpoint()
    }

    fn load_state(&mut self, ckpt: &Checkpoint) -> Result<()> {
        self.learner.load_state(ckpt)
    }
}
