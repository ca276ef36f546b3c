//! Proximal policy optimization with a categorical policy.
//!
//! Policy and value function are separate networks sharing one gradient
//! norm budget: both gradients are clipped jointly before their Adam steps.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    compute_gae, Algorithm, Checkpoint, Decision, HyperPpo, Learner, Transition, UpdateReport,
};
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm_many, snapshot, Activation, Adam, AdamConfig, GradBundle, Mlp};
use crate::pb2::HyperparamSpace;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    /// Rollout segment length.
    pub n_steps: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub clip_range: f64,
    pub normalize_advantage: bool,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            n_steps: 2048,
            batch_size: 64,
            n_epochs: 10,
            clip_range: 0.2,
            normalize_advantage: true,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            adam: AdamConfig {
                eps: 1e-5,
                ..AdamConfig::default()
            },
        }
    }
}

/// One on-policy segment.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }
}

/// Terms of the PPO objective on one minibatch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoLoss {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Largest gradient norm seen before clipping.
    pub max_grad_norm_pre_clip: f64,
    /// Largest gradient norm handed to the optimizer.
    pub max_grad_norm_applied: f64,
    pub minibatches: usize,
}

/// Numerically stable softmax and log-softmax of one row of logits.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Normalizes to zero mean and unit (sample) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// Minibatch inputs to the PPO objective. Advantages are used as given.
#[derive(Debug, Clone)]
pub struct PpoBatch {
    pub obs: Array2<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Evaluates the clipped-surrogate objective
/// `policy_loss + vf_coef * value_loss - ent_coef * entropy` and its
/// gradients with respect to both networks' parameters.
pub fn ppo_loss_and_grads(
    policy: &Mlp,
    value: &Mlp,
    batch: &PpoBatch,
    hp: &HyperPpo,
    clip_range: f64,
) -> Result<(PpoLoss, GradBundle, GradBundle)> {
    let b = batch.actions.len();
    if b == 0 {
        return Err(Error::invalid("empty PPO minibatch"));
    }
    let bf = b as f64;
    let ptape = policy.forward_batch(batch.obs.view())?;
    let vtape = value.forward_batch(batch.obs.view())?;
    let logits = ptape.output();
    let n_actions = logits.ncols();

    let mut loss = PpoLoss::default();
    let mut dlogits = Array2::<f64>::zeros((b, n_actions));
    let mut dvalue = Array2::<f64>::zeros((b, 1));
    for i in 0..b {
        let row: Vec<f64> = logits.row(i).to_vec();
        let logp = log_softmax(&row);
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let a = batch.actions[i];
        if a >= n_actions {
            return Err(Error::invalid(format!("action {a} out of range")));
        }
        let adv = batch.advantages[i];
        let log_ratio = logp[a] - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - clip_range, 1.0 + clip_range);
        let surrogate = (ratio * adv).min(clipped * adv);
        loss.policy_loss -= surrogate / bf;
        loss.approx_kl += ((ratio - 1.0) - log_ratio) / bf;
        if (ratio - 1.0).abs() > clip_range {
            loss.clip_fraction += 1.0 / bf;
        }
        // gradient flows only through the unclipped branch when it is the minimum
        let saturated =
            (adv >= 0.0 && ratio > 1.0 + clip_range) || (adv < 0.0 && ratio < 1.0 - clip_range);
        let dlogp = if saturated { 0.0 } else { -adv * ratio / bf };

        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        loss.entropy += entropy / bf;
        for j in 0..n_actions {
            let onehot = if j == a { 1.0 } else { 0.0 };
            // d(-ent_coef * H)/dz_j = ent_coef * p_j * (log p_j + H)
            dlogits[[i, j]] =
                dlogp * (onehot - probs[j]) + hp.ent_coef * probs[j] * (logp[j] + entropy) / bf;
        }

        let v = vtape.output()[[i, 0]];
        let err = v - batch.returns[i];
        loss.value_loss += err * err / bf;
        dvalue[[i, 0]] = hp.vf_coef * 2.0 * err / bf;
    }
    loss.total = loss.policy_loss + hp.vf_coef * loss.value_loss - hp.ent_coef * loss.entropy;

    let mut gp = GradBundle::zeros(policy.num_params());
    policy.backward_batch(&ptape, dlogits.view(), &mut gp)?;
    let mut gv = GradBundle::zeros(value.num_params());
    value.backward_batch(&vtape, dvalue.view(), &mut gv)?;
    Ok((loss, gp, gv))
}

#[derive(Debug, Clone)]
pub struct Ppo {
    cfg: PpoConfig,
    hp: HyperPpo,
    obs_dim: usize,
    n_actions: usize,
    policy: Mlp,
    value: Mlp,
    policy_opt: Adam,
    value_opt: Adam,
    rollout: RolloutBuffer,
    rng: Rng,
    updates: u64,
}

impl Ppo {
    pub fn new(
        obs_dim: usize,
        n_actions: usize,
        cfg: PpoConfig,
        hp: HyperPpo,
        seed: u64,
    ) -> Result<Self> {
        if cfg.n_steps == 0 || cfg.batch_size == 0 || cfg.n_epochs == 0 {
            return Err(Error::invalid(
                "PPO rollout, batch and epoch counts must be positive",
            ));
        }
        let mut init = rng::stream(seed, "ppo-init", 0);
        let sizes = |out: usize| -> Vec<usize> {
            std::iter::once(obs_dim)
                .chain(cfg.hidden.iter().copied())
                .chain(std::iter::once(out))
                .collect()
        };
        let policy = Mlp::new(
            &sizes(n_actions),
            cfg.activation,
            Activation::Identity,
            &mut init,
        )?;
        let value = Mlp::new(&sizes(1), cfg.activation, Activation::Identity, &mut init)?;
        Ok(Self {
            policy_opt: Adam::new(policy.num_params(), cfg.adam),
            value_opt: Adam::new(value.num_params(), cfg.adam),
            policy,
            value,
            rollout: RolloutBuffer::default(),
            rng: rng::stream(seed, "ppo-act", 0),
            cfg,
            hp,
            obs_dim,
            n_actions,
            updates: 0,
        })
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn hyper(&self) -> HyperPpo {
        self.hp
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    pub fn value(&self) -> &Mlp {
        &self.value
    }

    pub fn rollout(&self) -> &RolloutBuffer {
        &self.rollout
    }

    pub fn state_value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.forward(obs)?[0])
    }

    /// GAE over the current rollout with the current gamma and lambda.
    pub fn advantages(&self, last_value: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = &self.rollout;
        compute_gae(
            &r.rewards,
            &r.values,
            &r.dones,
            last_value,
            self.hp.gamma,
            self.hp.gae_lambda,
        )
    }

    /// Several epochs of shuffled minibatch updates over the rollout,
    /// which is cleared afterwards.
    pub fn update(&mut self, last_value: f64) -> Result<PpoDiagnostics> {
        let n = self.rollout.len();
        if n == 0 {
            return Err(Error::invalid("empty PPO rollout"));
        }
        let (advantages, returns) = self.advantages(last_value)?;
        let mut diag = PpoDiagnostics::default();
        let mut order: Vec<usize> = (0..n).collect();
        let lr = self.hp.learning_rate;
        for _ in 0..self.cfg.n_epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let mut adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
                if self.cfg.normalize_advantage {
                    normalize_advantages(&mut adv);
                }
                let batch = PpoBatch {
                    obs: Array2::from_shape_fn((chunk.len(), self.obs_dim), |(r, c)| {
                        self.rollout.obs[chunk[r]][c]
                    }),
                    actions: chunk.iter().map(|&i| self.rollout.actions[i]).collect(),
                    old_log_probs: chunk.iter().map(|&i| self.rollout.log_probs[i]).collect(),
                    advantages: adv,
                    returns: chunk.iter().map(|&i| returns[i]).collect(),
                };
                let (loss, mut gp, mut gv) = ppo_loss_and_grads(
                    &self.policy,
                    &self.value,
                    &batch,
                    &self.hp,
                    self.cfg.clip_range,
                )?;
                let pre = clip_global_norm_many(&mut [&mut gp, &mut gv], self.hp.max_grad_norm);
                let applied = (gp.sum_of_squares() + gv.sum_of_squares()).sqrt();
                diag.max_grad_norm_pre_clip = diag.max_grad_norm_pre_clip.max(pre);
                diag.max_grad_norm_applied = diag.max_grad_norm_applied.max(applied);
                self.policy_opt.step(self.policy.params_mut(), &gp, lr)?;
                self.value_opt.step(self.value.params_mut(), &gv, lr)?;
                diag.policy_loss += loss.policy_loss;
                diag.value_loss += loss.value_loss;
                diag.entropy += loss.entropy;
                diag.approx_kl += loss.approx_kl;
                diag.clip_fraction += loss.clip_fraction;
                diag.minibatches += 1;
            }
        }
        let m = diag.minibatches as f64;
        diag.policy_loss /= m;
        diag.value_loss /= m;
        diag.entropy /= m;
        diag.approx_kl /= m;
        diag.clip_fraction /= m;
        self.rollout.clear();
        self.updates += 1;
        Ok(diag)
    }

    fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.policy.forward(obs)
    }
}

impl Learner for Ppo {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ppo
    }

    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn act(&mut self, obs: &[f64]) -> Result<Decision> {
        let logp = log_softmax(&self.logits(obs)?);
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut action = self.n_actions - 1;
        for (i, l) in logp.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                action = i;
                break;
            }
        }
        Ok(Decision {
            action: Action::Discrete(action),
            log_prob: logp[action],
            value: self.state_value(obs)?,
        })
    }

    fn act_greedy(&self, obs: &[f64]) -> Result<Action> {
        let logits = self.logits(obs)?;
        let best = logits
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &z)| if z > acc.1 { (i, z) } else { acc },
            )
            .0;
        Ok(Action::Discrete(best))
    }

    fn observe(&mut self, t: Transition<'_>) -> Result<Option<UpdateReport>> {
        let action = match t.decision.action {
            Action::Discrete(a) if a < self.n_actions => a,
            _ => return Err(Error::invalid("PPO stores discrete actions")),
        };
        let mut reward = t.reward;
        if t.truncated && !t.terminated {
            // time-limit cut: fold the bootstrap value into the reward
            reward += self.hp.gamma * self.state_value(t.next_obs)?;
        }
        let r = &mut self.rollout;
        r.obs.push(t.obs.to_vec());
        r.actions.push(action);
        r.log_probs.push(t.decision.log_prob);
        r.values.push(t.decision.value);
        r.rewards.push(reward);
        r.dones.push(t.terminated || t.truncated);
        if r.len() < self.cfg.n_steps {
            return Ok(None);
        }
        let last_value = self.state_value(t.next_obs)?;
        let d = self.update(last_value)?;
        Ok(Some(UpdateReport {
            losses: [
                ("policy_loss".to_string(), d.policy_loss),
                ("value_loss".to_string(), d.value_loss),
                ("entropy".to_string(), d.entropy),
                ("approx_kl".to_string(), d.approx_kl),
                ("grad_norm".to_string(), d.max_grad_norm_applied),
            ]
            .into_iter()
            .collect(),
        }))
    }

    fn hyperparams(&self) -> Vec<f64> {
        self.hp.to_vec()
    }

    fn set_hyperparams(&mut self, hp: &[f64]) -> Result<()> {
        self.hp = HyperPpo::from_slice(hp)?;
        Ok(())
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut opt = self.policy_opt.to_sections("policy_opt").to_vec();
        opt.extend(self.value_opt.to_sections("value_opt"));
        Checkpoint {
            algorithm: Algorithm::Ppo,
            weights: snapshot::encode(&[
                self.policy.to_section("policy"),
                self.value.to_section("value"),
            ]),
            hyperparams: HyperparamSpace::ppo().to_map(&self.hp.to_vec()),
            optimizer: snapshot::encode(&opt),
        }
    }

    fn load_state(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.algorithm != Algorithm::Ppo {
            return Err(Error::invalid("checkpoint is not a PPO agent"));
        }
        let w = snapshot::decode(&ckpt.weights)?;
        let o = snapshot::decode(&ckpt.optimizer)?;
        let policy = Mlp::from_section(snapshot::find(&w, "policy")?)?;
        let value = Mlp::from_section(snapshot::find(&w, "value")?)?;
        if policy.sizes() != self.policy.sizes() || value.sizes() != self.value.sizes() {
            return Err(Error::invalid("checkpoint network shapes differ"));
        }
        self.policy = policy;
        self.value = value;
        self.policy_opt = Adam::from_sections(&o, "policy_opt")?;
        self.value_opt = Adam::from_sections(&o, "value_opt")?;
        self.rollout.clear();
        Ok(())
    }

    fn updates(&self) -> u64 {
        self.updates
    }
}

/// Builds a batch view for tests and diagnostics.
pub fn batch_from_rows(
    obs: ArrayView2<'_, f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    returns: &[f64],
) -> PpoBatch {
    PpoBatch {
        obs: obs.to_owned(),
        actions: actions.to_vec(),
        old_log_probs: old_log_probs.to_vec(),
        advantages: advantages.to_vec(),
        returns: returns.to_vec(),
    }
}
