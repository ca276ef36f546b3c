//! Simplified planar lander.
//!
//! A point mass with orientation, integrated with semi-implicit Euler at
//! 50 Hz under a context-dependent vertical gravity. Legs are two rigid
//! points below the body; contact is a height test against flat ground at
//! `y = 0`. Thruster impulses are deterministic.
//!
//! Rewards follow the usual lander shaping: the step-to-step change of a
//! potential built from distance to the pad, speed, tilt and leg contact,
//! minus fuel, plus a terminal bonus of +100 for coming to rest on the pad
//! or -100 for crashing.

use rand::Rng as _;

use super::{expect_discrete, Action, ActionKind, EnvSpec, Environment, StepResult};
use crate::context::{Context, ContextFeature};
use crate::error::Result;
use crate::rng;

pub const FPS: f64 = 50.0;
pub const DT: f64 = 1.0 / FPS;
pub const HORIZON: u64 = 1000;
pub const WORLD_W: f64 = 20.0;
pub const WORLD_H: f64 = 40.0 / 3.0;
pub const PAD_HALF_WIDTH: f64 = 2.0;
pub const START_HEIGHT: f64 = 12.0;

pub const MAIN_ACCEL: f64 = 18.0;
pub const SIDE_ACCEL: f64 = 2.0;
pub const SIDE_ANGULAR_ACCEL: f64 = 3.0;
pub const MAIN_FUEL: f64 = 0.3;
pub const SIDE_FUEL: f64 = 0.03;

/// Body-frame leg tip offsets `(±LEG_X, -LEG_Y)`.
pub const LEG_X: f64 = 0.8;
pub const LEG_Y: f64 = 0.9;
pub const CRASH_SPEED: f64 = 2.5;
pub const CRASH_ANGLE: f64 = 0.6;
pub const REST_SPEED: f64 = 0.1;

pub fn spec() -> EnvSpec {
    EnvSpec {
        name: "lander".into(),
        base_obs_dim: 8,
        action: ActionKind::Discrete { n: 4 },
        horizon: HORIZON,
        features: vec![ContextFeature::negative("gravity_y", -10.0)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderParams {
    pub gravity_y: f64,
}

impl Default for LanderParams {
    fn default() -> Self {
        Self { gravity_y: -10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderState {
    pub x: f64,
    /// Height of the centre of mass above the ground.
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub angle: f64,
    pub angular_velocity: f64,
    pub left_contact: bool,
    pub right_contact: bool,
    /// Shaping potential of this state, carried so the step reward is a
    /// pure function of `(state, action)`.
    pub shaping: f64,
}

impl LanderState {
    /// Observation scaled to roughly unit range.
    pub fn observation(&self) -> Vec<f64> {
        vec![
            self.x / (WORLD_W / 2.0),
            (self.y - LEG_Y) / (WORLD_H / 2.0),
            self.vx * (WORLD_W / 2.0) / FPS,
            self.vy * (WORLD_H / 2.0) / FPS,
            self.angle,
            20.0 * self.angular_velocity / FPS,
            f64::from(u8::from(self.left_contact)),
            f64::from(u8::from(self.right_contact)),
        ]
    }

    pub fn potential(&self) -> f64 {
        let o = self.observation();
        -100.0 * (o[0] * o[0] + o[1] * o[1]).sqrt()
            - 100.0 * (o[2] * o[2] + o[3] * o[3]).sqrt()
            - 100.0 * o[4].abs()
            + 10.0 * o[6]
            + 10.0 * o[7]
    }

    /// World-frame heights of the left and right leg tips.
    pub fn leg_heights(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let tip = |lx: f64| self.y + s * lx - c * LEG_Y;
        (tip(-LEG_X), tip(LEG_X))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Flying,
    Crashed,
    Landed,
}

/// One transition. Returns next state, reward and outcome.
pub fn step_dynamics(
    p: &LanderParams,
    s: &LanderState,
    action: usize,
) -> (LanderState, f64, Outcome) {
    let (sin_a, cos_a) = s.angle.sin_cos();
    let (mut ax, mut ay, mut alpha, mut fuel) = (0.0, p.gravity_y, 0.0, 0.0);
    match action {
        1 => {
            ax += SIDE_ACCEL * cos_a;
            ay += SIDE_ACCEL * sin_a;
            alpha -= SIDE_ANGULAR_ACCEL;
            fuel += SIDE_FUEL;
        }
        2 => {
            ax += -MAIN_ACCEL * sin_a;
            ay += MAIN_ACCEL * cos_a;
            fuel += MAIN_FUEL;
        }
        3 => {
            ax -= SIDE_ACCEL * cos_a;
            ay -= SIDE_ACCEL * sin_a;
            alpha += SIDE_ANGULAR_ACCEL;
            fuel += SIDE_FUEL;
        }
        _ => {}
    }

    let mut n = *s;
    n.vx += ax * DT;
    n.vy += ay * DT;
    n.angular_velocity += alpha * DT;
    n.x += n.vx * DT;
    n.y += n.vy * DT;
    n.angle += n.angular_velocity * DT;

    let (left, right) = n.leg_heights();
    let lowest = left.min(right);
    let mut outcome = Outcome::Flying;
    if lowest <= 0.0 {
        if n.vy < -CRASH_SPEED || n.angle.abs() > CRASH_ANGLE {
            outcome = Outcome::Crashed;
        } else {
            n.y -= lowest;
            n.vy = n.vy.max(0.0);
            n.vx *= 0.9;
            n.angular_velocity *= 0.7;
            n.angle *= 0.9;
        }
    }
    if n.x.abs() > WORLD_W / 2.0 {
        outcome = Outcome::Crashed;
    }
    let (left, right) = n.leg_heights();
    n.left_contact = left <= 1e-9;
    n.right_contact = right <= 1e-9;
    if outcome == Outcome::Flying
        && n.left_contact
        && n.right_contact
        && n.vx.abs() < REST_SPEED
        && n.vy.abs() < REST_SPEED
        && n.angular_velocity.abs() < REST_SPEED
    {
        outcome = Outcome::Landed;
    }

    n.shaping = n.potential();
    let mut reward = n.shaping - s.shaping - fuel;
    match outcome {
        Outcome::Crashed => reward = -100.0,
        Outcome::Landed if n.x.abs() <= PAD_HALF_WIDTH => reward += 100.0,
        _ => {}
    }
    (n, reward, outcome)
}

pub struct Lander {
    spec: EnvSpec,
    params: LanderParams,
    state: LanderState,
    steps: u64,
}

impl Lander {
    pub fn new() -> Self {
        Self {
            spec: spec(),
            params: LanderParams::default(),
            state: initial_state(0.0, START_HEIGHT, 0.0, 0.0, 0.0, 0.0),
            steps: 0,
        }
    }

    pub fn params(&self) -> LanderParams {
        self.params
    }

    pub fn state(&self) -> LanderState {
        self.state
    }

    pub fn set_state(&mut self, state: LanderState) {
        self.state = state;
    }
}

impl Default for Lander {
    fn default() -> Self {
        Self::new()
    }
}

/// Builds a state with contacts and shaping potential filled in.
pub fn initial_state(
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    angle: f64,
    angular_velocity: f64,
) -> LanderState {
    let mut s = LanderState {
        x,
        y,
        vx,
        vy,
        angle,
        angular_velocity,
        left_contact: false,
        right_contact: false,
        shaping: 0.0,
    };
    let (l, r) = s.leg_heights();
    s.left_contact = l <= 1e-9;
    s.right_contact = r <= 1e-9;
    s.shaping = s.potential();
    s
}

impl Environment for Lander {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, ctx: &Context, seed: u64) -> Result<Vec<f64>> {
        ctx.validate(&self.spec.features)?;
        self.params = LanderParams {
            gravity_y: self.spec.resolve(ctx, "gravity_y"),
        };
        let mut rng = rng::seeded(seed);
        self.state = initial_state(
            rng.random_range(-0.5..0.5),
            START_HEIGHT,
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..0.0),
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.1..0.1),
        );
        self.steps = 0;
        Ok(self.state.observation())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        let a = expect_discrete(action, 4)?;
        let (next, reward, outcome) = step_dynamics(&self.params, &self.state, a);
        self.state = next;
        self.steps += 1;
        let terminated = outcome != Outcome::Flying;
        Ok(StepResult {
            obs: self.state.observation(),
            reward,
            terminated,
            truncated: !terminated && self.steps >= self.spec.horizon,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        let s = &self.state;
        vec![
            s.x,
            s.y,
            s.vx,
            s.vy,
            s.angle,
            s.angular_velocity,
            f64::from(u8::from(s.left_contact)),
            f64::from(u8::from(s.right_contact)),
        ]
    }

    fn state_labels(&self) -> &'static [&'static str] {
        &[
            "x",
            "y",
            "vx",
            "vy",
            "angle",
            "angular_velocity",
            "left_contact",
            "right_contact",
        ]
    }
}
