use ndarray::Array2;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fixed-capacity FIFO of transitions stored as flat rows.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<bool>,
    /// Slot the next push overwrites once the buffer is full.
    head: usize,
}

/// Struct-of-arrays minibatch.
#[derive(Debug, Clone)]
pub struct ReplayBatch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Array2<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], done: bool) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(action.len(), self.act_dim);
        if self.len() < self.capacity {
            self.obs.extend_from_slice(obs);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.dones.push(done);
        } else {
            let i = self.head;
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(obs);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next_obs);
            self.dones[i] = done;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Reward stored at logical position `i` (0 = oldest).
    pub fn reward_at(&self, i: usize) -> f64 {
        let physical = if self.len() < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        };
        self.rewards[physical]
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Result<ReplayBatch> {
        if batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if self.len() < batch_size {
            return Err(Error::invalid(format!(
                "replay holds {} transitions, batch needs {batch_size}",
                self.len()
            )));
        }
        let idx: Vec<usize> = (0..batch_size)
            .map(|_| rng.random_range(0..self.len()))
            .collect();
        Ok(self.gather(&idx))
    }

    pub fn gather(&self, idx: &[usize]) -> ReplayBatch {
        let (od, ad) = (self.obs_dim, self.act_dim);
        let b = idx.len();
        ReplayBatch {
            obs: Array2::from_shape_fn((b, od), |(r, c)| self.obs[idx[r] * od + c]),
            actions: Array2::from_shape_fn((b, ad), |(r, c)| self.actions[idx[r] * ad + c]),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_obs: Array2::from_shape_fn((b, od), |(r, c)| self.next_obs[idx[r] * od + c]),
            dones: idx.iter().map(|&i| self.dones[i]).collect(),
        }
    }
}
