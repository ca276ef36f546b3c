//! Inverted pendulum swing-up with a continuous torque.
//!
//! `theta = 0` is upright. Explicit Euler with `dt = 0.05`.

use rand::Rng as _;

use super::{Action, ActionKind, EnvSpec, Environment, StepResult};
use crate::context::{Context, ContextFeature};
use crate::error::{Error, Result};
use crate::rng;

pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const HORIZON: u64 = 200;

pub fn spec() -> EnvSpec {
    EnvSpec {
        name: "pendulum".into(),
        base_obs_dim: 3,
        action: ActionKind::ContinuousBox {
            dim: 1,
            low: -MAX_TORQUE,
            high: MAX_TORQUE,
        },
        horizon: HORIZON,
        features: vec![
            ContextFeature::positive("g", 10.0),
            ContextFeature::positive("m", 1.0),
            ContextFeature::positive("l", 1.0),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub g: f64,
    pub m: f64,
    pub l: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            g: 10.0,
            m: 1.0,
            l: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

/// One Euler step. `torque` is clipped to `[-2, 2]`.
///
/// Returns the next state and the reward
/// `-(wrap(theta)^2 + 0.1 * theta_dot'^2 + 0.001 * u^2)`.
pub fn step_dynamics(
    p: &PendulumParams,
    s: &PendulumState,
    torque: f64,
) -> Result<(PendulumState, f64)> {
    if !torque.is_finite() {
        return Err(Error::invalid("pendulum torque must be finite"));
    }
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let theta_dot = (s.theta_dot
        + (3.0 * p.g / (2.0 * p.l)) * s.theta.sin() * DT
        + (3.0 / (p.m * p.l * p.l)) * u * DT)
        .clamp(-MAX_SPEED, MAX_SPEED);
    let theta = s.theta + theta_dot * DT;
    let wrapped = super::wrap_angle(s.theta);
    let reward = -(wrapped * wrapped + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
    Ok((PendulumState { theta, theta_dot }, reward))
}

pub struct Pendulum {
    spec: EnvSpec,
    params: PendulumParams,
    state: PendulumState,
    steps: u64,
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            spec: spec(),
            params: PendulumParams::default(),
            state: PendulumState {
                theta: 0.0,
                theta_dot: 0.0,
            },
            steps: 0,
        }
    }

    pub fn params(&self) -> PendulumParams {
        self.params
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    /// Overrides the physical state, keeping the step counter.
    pub fn set_state(&mut self, state: PendulumState) {
        self.state = state;
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, ctx: &Context, seed: u64) -> Result<Vec<f64>> {
        ctx.validate(&self.spec.features)?;
        self.params = PendulumParams {
            g: self.spec.resolve(ctx, "g"),
            m: self.spec.resolve(ctx, "m"),
            l: self.spec.resolve(ctx, "l"),
        };
        let mut rng = rng::seeded(seed);
        self.state = PendulumState {
            theta: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            theta_dot: rng.random_range(-1.0..1.0),
        };
        self.steps = 0;
        Ok(self.state.observation())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        let torque = match action {
            Action::Continuous(v) if v.len() == 1 => v[0],
            _ => return Err(Error::invalid("pendulum expects a 1-d continuous action")),
        };
        let (next, reward) = step_dynamics(&self.params, &self.state, torque)?;
        self.state = next;
        self.steps += 1;
        Ok(StepResult {
            obs: self.state.observation(),
            reward,
            terminated: false,
            truncated: self.steps >= self.spec.horizon,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        vec![self.state.theta, self.state.theta_dot]
    }

    fn state_labels(&self) -> &'static [&'static str] {
        &["theta", "theta_dot"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn upright_fixed_point() {
        let s = PendulumState {
            theta: 0.0,
            theta_dot: 0.0,
        };
        let (next, r) = step_dynamics(&PendulumParams::default(), &s, 0.0).unwrap();
        assert_eq!(next, s);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn reset_is_deterministic() {
        let mut env = Pendulum::new();
        let a = env.reset(&Context::empty(), 5).unwrap();
        let b = env.reset(&Context::empty(), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn truncates_at_horizon() {
        let mut env = Pendulum::new();
        env.reset(&Context::single("g", 12.0), 1).unwrap();
        for i in 1..=HORIZON {
            let r = env.step(&Action::Continuous(vec![0.5])).unwrap();
            assert!(!r.terminated);
            assert_eq!(r.truncated, i == HORIZON);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut env = Pendulum::new();
        assert!(env.reset(&Context::single("gravity", 9.0), 0).is_err());
        env.reset(&Context::empty(), 0).unwrap();
        assert!(env.step(&Action::Continuous(vec![f64::NAN])).is_err());
        assert!(env.step(&Action::Discrete(0)).is_err());
    }

    #[test]
    fn speed_clamp_and_reward_bounds() {
        let p = PendulumParams {
            g: 30.0,
            ..Default::default()
        };
        let lo = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
        let mut s = PendulumState {
            theta: 1.5,
            theta_dot: 7.9,
        };
        for _ in 0..500 {
            let (n, r) = step_dynamics(&p, &s, 5.0).unwrap();
            assert!(n.theta_dot.abs() <= MAX_SPEED);
            assert!((lo..=0.0).contains(&r));
            s = n;
        }
    }
}
