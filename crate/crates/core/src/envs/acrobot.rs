//! Two-link acrobot, torque applied at the elbow.
//!
//! Book formulation of the equations of motion, integrated with a single
//! classical RK4 step of `dt = 0.2`. Only the first link's length is a
//! context feature; centre-of-mass positions stay at 0.5.

use std::f64::consts::PI;

use rand::Rng as _;

use super::{expect_discrete, Action, ActionKind, EnvSpec, Environment, StepResult};
use crate::context::{Context, ContextFeature};
use crate::error::Result;
use crate::rng;

pub const DT: f64 = 0.2;
pub const HORIZON: u64 = 500;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
pub const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];
const GRAVITY: f64 = 9.8;

pub fn spec() -> EnvSpec {
    EnvSpec {
        name: "acrobot".into(),
        base_obs_dim: 6,
        action: ActionKind::Discrete { n: 3 },
        horizon: HORIZON,
        features: vec![
            ContextFeature::positive("link_length_1", 1.0),
            ContextFeature::positive("link_mass_1", 1.0),
            ContextFeature::positive("link_mass_2", 1.0),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcrobotParams {
    pub link_length_1: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_com_1: f64,
    pub link_com_2: f64,
    pub link_moi: f64,
}

impl Default for AcrobotParams {
    fn default() -> Self {
        Self {
            link_length_1: 1.0,
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            link_com_1: 0.5,
            link_com_2: 0.5,
            link_moi: 1.0,
        }
    }
}

/// `[theta1, theta2, theta1_dot, theta2_dot]`.
pub type AcrobotState = [f64; 4];

pub fn observation(s: &AcrobotState) -> Vec<f64> {
    vec![s[0].cos(), s[0].sin(), s[1].cos(), s[1].sin(), s[2], s[3]]
}

/// Height of the tip above the pivot, in units of link length 1.
pub fn tip_height(s: &AcrobotState) -> f64 {
    -s[0].cos() - (s[0] + s[1]).cos()
}

pub fn is_terminal(s: &AcrobotState) -> bool {
    tip_height(s) > 1.0
}

/// Time derivative of the state under elbow torque `a`.
pub fn derivatives(p: &AcrobotParams, s: &AcrobotState, a: f64) -> AcrobotState {
    let (m1, m2) = (p.link_mass_1, p.link_mass_2);
    let l1 = p.link_length_1;
    let (lc1, lc2) = (p.link_com_1, p.link_com_2);
    let (i1, i2) = (p.link_moi, p.link_moi);
    let [theta1, theta2, dtheta1, dtheta2] = *s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * GRAVITY * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * GRAVITY * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (a + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn axpy(s: &AcrobotState, k: &AcrobotState, h: f64) -> AcrobotState {
    [
        s[0] + h * k[0],
        s[1] + h * k[1],
        s[2] + h * k[2],
        s[3] + h * k[3],
    ]
}

/// One RK4 step over `dt` without wrapping or clamping.
pub fn rk4(p: &AcrobotParams, s: &AcrobotState, a: f64, dt: f64) -> AcrobotState {
    let k1 = derivatives(p, s, a);
    let k2 = derivatives(p, &axpy(s, &k1, dt / 2.0), a);
    let k3 = derivatives(p, &axpy(s, &k2, dt / 2.0), a);
    let k4 = derivatives(p, &axpy(s, &k3, dt), a);
    let mut out = *s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Full environment transition: integrate, wrap angles, clamp velocities.
/// Reward is -1 per step, 0 on the step that reaches the goal height.
pub fn step_dynamics(
    p: &AcrobotParams,
    s: &AcrobotState,
    action: usize,
) -> (AcrobotState, f64, bool) {
    let raw = rk4(p, s, TORQUES[action], DT);
    let next = [
        super::wrap_angle(raw[0]),
        super::wrap_angle(raw[1]),
        raw[2].clamp(-MAX_VEL_1, MAX_VEL_1),
        raw[3].clamp(-MAX_VEL_2, MAX_VEL_2),
    ];
    let terminated = is_terminal(&next);
    (next, if terminated { 0.0 } else { -1.0 }, terminated)
}

pub struct Acrobot {
    spec: EnvSpec,
    params: AcrobotParams,
    state: AcrobotState,
    steps: u64,
}

impl Acrobot {
    pub fn new() -> Self {
        Self {
            spec: spec(),
            params: AcrobotParams::default(),
            state: [0.0; 4],
            steps: 0,
        }
    }

    pub fn params(&self) -> AcrobotParams {
        self.params
    }

    pub fn state(&self) -> AcrobotState {
        self.state
    }

    pub fn set_state(&mut self, state: AcrobotState) {
        self.state = state;
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Acrobot {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, ctx: &Context, seed: u64) -> Result<Vec<f64>> {
        ctx.validate(&self.spec.features)?;
        self.params = AcrobotParams {
            link_length_1: self.spec.resolve(ctx, "link_length_1"),
            link_mass_1: self.spec.resolve(ctx, "link_mass_1"),
            link_mass_2: self.spec.resolve(ctx, "link_mass_2"),
            ..AcrobotParams::default()
        };
        let mut rng = rng::seeded(seed);
        for x in self.state.iter_mut() {
            *x = rng.random_range(-0.1..0.1);
        }
        self.steps = 0;
        Ok(observation(&self.state))
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        let a = expect_discrete(action, TORQUES.len())?;
        let (next, reward, terminated) = step_dynamics(&self.params, &self.state, a);
        self.state = next;
        self.steps += 1;
        Ok(StepResult {
            obs: observation(&self.state),
            reward,
            terminated,
            truncated: !terminated && self.steps >= self.spec.horizon,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn state_labels(&self) -> &'static [&'static str] {
        &["theta1", "theta2", "theta1_dot", "theta2_dot"]
    }
}
