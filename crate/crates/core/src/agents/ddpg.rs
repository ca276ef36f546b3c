//! Deep deterministic policy gradient.
//!
//! The actor outputs a tanh-squashed action in `[-1, 1]^d`, which is scaled
//! to the environment box on the way out. Replay stores the normalized
//! action and the critic consumes `[obs, normalized action]`.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    Algorithm, Checkpoint, Decision, HyperDdpg, Learner, ReplayBatch, ReplayBuffer, Transition,
    UpdateReport,
};
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::{snapshot, Activation, Adam, AdamConfig, GradBundle, Mlp};
use crate::pb2::HyperparamSpace;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgConfig {
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Steps of uniform random exploration before updates begin.
    pub learning_starts: usize,
    /// Exploration noise standard deviation as a fraction of the box half-width.
    pub noise_scale: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            buffer_capacity: 1_000_000,
            learning_starts: 1000,
            noise_scale: 0.1,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpgDiagnostics {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub mean_target: f64,
}

#[derive(Debug, Clone)]
pub struct Ddpg {
    cfg: DdpgConfig,
    hp: HyperDdpg,
    obs_dim: usize,
    act_dim: usize,
    low: f64,
    high: f64,
    actor: Mlp,
    critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    buffer: ReplayBuffer,
    rng: Rng,
    steps: u64,
    updates: u64,
}

impl Ddpg {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        (low, high): (f64, f64),
        cfg: DdpgConfig,
        hp: HyperDdpg,
        seed: u64,
    ) -> Result<Self> {
        if low.is_nan() || high.is_nan() || low >= high {
            return Err(Error::invalid("action box must have low < high"));
        }
        if cfg.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let mut init = rng::stream(seed, "ddpg-init", 0);
        let actor_sizes: Vec<usize> = std::iter::once(obs_dim)
            .chain(cfg.hidden.iter().copied())
            .chain(std::iter::once(act_dim))
            .collect();
        let critic_sizes: Vec<usize> = std::iter::once(obs_dim + act_dim)
            .chain(cfg.hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let actor = Mlp::new(&actor_sizes, cfg.activation, Activation::Tanh, &mut init)?;
        let critic = Mlp::new(
            &critic_sizes,
            cfg.activation,
            Activation::Identity,
            &mut init,
        )?;
        Ok(Self {
            actor_opt: Adam::new(actor.num_params(), cfg.adam),
            critic_opt: Adam::new(critic.num_params(), cfg.adam),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim),
            rng: rng::stream(seed, "ddpg-act", 0),
            cfg,
            hp,
            obs_dim,
            act_dim,
            low,
            high,
            steps: 0,
            updates: 0,
        })
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn hyper(&self) -> HyperDdpg {
        self.hp
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &Mlp {
        &self.critic_target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    fn half_range(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    fn to_env(&self, normalized: f64) -> f64 {
        self.low + (normalized + 1.0) * self.half_range()
    }

    fn to_normalized(&self, env: f64) -> f64 {
        (env - self.low) / self.half_range() - 1.0
    }

    /// Actor output plus Gaussian noise of `noise_scale` box half-widths,
    /// clipped to the box.
    pub fn noisy_action(&self, obs: &[f64], noise_scale: f64, rng: &mut Rng) -> Result<Vec<f64>> {
        let mu = self.actor.forward(obs)?;
        Ok(mu
            .into_iter()
            .map(|m| {
                let noise: f64 = if noise_scale > 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                };
                (self.to_env(m) + noise_scale * self.half_range() * noise)
                    .clamp(self.low, self.high)
            })
            .collect())
    }

    fn critic_input(obs: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array2<f64> {
        concatenate(Axis(1), &[obs, actions]).expect("matching rows")
    }

    /// Bootstrapped critic targets `r + gamma * (1 - done) * Q'(s', mu'(s'))`.
    pub fn critic_targets(&self, batch: &ReplayBatch) -> Result<Vec<f64>> {
        let next_actions = self.actor_target.forward_batch(batch.next_obs.view())?;
        let input = Self::critic_input(batch.next_obs.view(), next_actions.output());
        let q_next = self.critic_target.forward_batch(input.view())?;
        Ok(batch
            .rewards
            .iter()
            .zip(&batch.dones)
            .zip(q_next.output().column(0))
            .map(|((&r, &d), &q)| if d { r } else { r + self.hp.gamma * q })
            .collect())
    }

    /// One critic step, one actor step, then soft target updates.
    pub fn update(&mut self, batch: &ReplayBatch) -> Result<DdpgDiagnostics> {
        let b = batch.len();
        if b == 0 {
            return Err(Error::invalid("empty DDPG batch"));
        }
        let targets = self.critic_targets(batch)?;
        let lr = self.hp.learning_rate;

        // critic: mean squared TD error
        let input = Self::critic_input(batch.obs.view(), batch.actions.view());
        let tape = self.critic.forward_batch(input.view())?;
        let q = tape.output();
        let mut upstream = Array2::<f64>::zeros((b, 1));
        let mut critic_loss = 0.0;
        for i in 0..b {
            let err = q[[i, 0]] - targets[i];
            critic_loss += err * err;
            upstream[[i, 0]] = 2.0 * err / b as f64;
        }
        critic_loss /= b as f64;
        let mut critic_grads = GradBundle::zeros(self.critic.num_params());
        self.critic
            .backward_batch(&tape, upstream.view(), &mut critic_grads)?;
        self.critic_opt
            .step(self.critic.params_mut(), &critic_grads, lr)?;

        // actor: ascend Q(s, mu(s)) through the freshly updated critic
        let actor_tape = self.actor.forward_batch(batch.obs.view())?;
        let input = Self::critic_input(batch.obs.view(), actor_tape.output());
        let q_tape = self.critic.forward_batch(input.view())?;
        let actor_loss = -q_tape.output().column(0).sum() / b as f64;
        let upstream = Array2::<f64>::from_elem((b, 1), -1.0 / b as f64);
        let mut scratch = GradBundle::zeros(self.critic.num_params());
        let dinput = self
            .critic
            .backward_batch(&q_tape, upstream.view(), &mut scratch)?;
        let daction = dinput.slice(ndarray::s![.., self.obs_dim..]).to_owned();
        let mut actor_grads = GradBundle::zeros(self.actor.num_params());
        self.actor
            .backward_batch(&actor_tape, daction.view(), &mut actor_grads)?;
        self.actor_opt
            .step(self.actor.params_mut(), &actor_grads, lr)?;

        self.actor
            .soft_update_into(&mut self.actor_target, self.hp.tau)?;
        self.critic
            .soft_update_into(&mut self.critic_target, self.hp.tau)?;
        self.updates += 1;

        Ok(DdpgDiagnostics {
            critic_loss,
            actor_loss,
            mean_target: targets.iter().sum::<f64>() / b as f64,
        })
    }

    fn weight_sections(&self) -> Vec<snapshot::Section> {
        vec![
            self.actor.to_section("actor"),
            self.critic.to_section("critic"),
            self.actor_target.to_section("actor_target"),
            self.critic_target.to_section("critic_target"),
        ]
    }
}

impl Learner for Ddpg {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ddpg
    }

    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn act(&mut self, obs: &[f64]) -> Result<Decision> {
        let action = if (self.steps as usize) < self.cfg.learning_starts {
            let (low, high) = (self.low, self.high);
            (0..self.act_dim)
                .map(|_| self.rng.random_range(low..=high))
                .collect()
        } else {
            let mut rng = self.rng.clone();
            let a = self.noisy_action(obs, self.cfg.noise_scale, &mut rng)?;
            self.rng = rng;
            a
        };
        Ok(Decision {
            action: Action::Continuous(action),
            log_prob: 0.0,
            value: 0.0,
        })
    }

    fn act_greedy(&self, obs: &[f64]) -> Result<Action> {
        let mu = self.actor.forward(obs)?;
        Ok(Action::Continuous(
            mu.into_iter().map(|m| self.to_env(m)).collect(),
        ))
    }

    fn observe(&mut self, t: Transition<'_>) -> Result<Option<UpdateReport>> {
        let action = match &t.decision.action {
            Action::Continuous(a) if a.len() == self.act_dim => a,
            _ => return Err(Error::invalid("DDPG stores continuous actions")),
        };
        let normalized: Vec<f64> = action.iter().map(|&a| self.to_normalized(a)).collect();
        // truncation is not a true terminal: keep bootstrapping through it
        self.buffer
            .push(t.obs, &normalized, t.reward, t.next_obs, t.terminated);
        self.steps += 1;
        if (self.steps as usize) < self.cfg.learning_starts
            || self.buffer.len() < self.cfg.batch_size
        {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.rng)?;
        let d = self.update(&batch)?;
        Ok(Some(UpdateReport {
            losses: [
                ("critic_loss".to_string(), d.critic_loss),
                ("actor_loss".to_string(), d.actor_loss),
            ]
            .into_iter()
            .collect(),
        }))
    }

    fn hyperparams(&self) -> Vec<f64> {
        self.hp.to_vec()
    }

    fn set_hyperparams(&mut self, hp: &[f64]) -> Result<()> {
        self.hp = HyperDdpg::from_slice(hp)?;
        Ok(())
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut opt = self.actor_opt.to_sections("actor_opt").to_vec();
        opt.extend(self.critic_opt.to_sections("critic_opt"));
        Checkpoint {
            algorithm: Algorithm::Ddpg,
            weights: snapshot::encode(&self.weight_sections()),
            hyperparams: HyperparamSpace::ddpg().to_map(&self.hp.to_vec()),
            optimizer: snapshot::encode(&opt),
        }
    }

    fn load_state(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.algorithm != Algorithm::Ddpg {
            return Err(Error::invalid("checkpoint is not a DDPG agent"));
        }
        let w = snapshot::decode(&ckpt.weights)?;
        let o = snapshot::decode(&ckpt.optimizer)?;
        let actor = Mlp::from_section(snapshot::find(&w, "actor")?)?;
        let critic = Mlp::from_section(snapshot::find(&w, "critic")?)?;
        if actor.sizes() != self.actor.sizes() || critic.sizes() != self.critic.sizes() {
            return Err(Error::invalid("checkpoint network shapes differ"));
        }
        self.actor_target = Mlp::from_section(snapshot::find(&w, "actor_target")?)?;
        self.critic_target = Mlp::from_section(snapshot::find(&w, "critic_target")?)?;
        self.actor = actor;
        self.critic = critic;
        self.actor_opt = Adam::from_sections(&o, "actor_opt")?;
        self.critic_opt = Adam::from_sections(&o, "critic_opt")?;
        Ok(())
    }

    fn updates(&self) -> u64 {
        self.updates
    }
}
