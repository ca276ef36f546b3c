//! Contextual classic-control environments.
//!
//! Each environment exposes its dynamics as a pure step function over an
//! explicit state and parameter struct (used directly by oracle tests) and
//! wraps it in the stateful [`Environment`] trait used for training.

use serde::{Deserialize, Serialize};

use crate::context::{Context, ContextFeature};
use crate::error::{Error, Result};

pub mod acrobot;
pub mod lander;
pub mod pendulum;
pub mod trajectory;

pub use acrobot::Acrobot;
pub use lander::Lander;
pub use pendulum::Pendulum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pendulum,
    Acrobot,
    Lander,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Pendulum, EnvKind::Acrobot, EnvKind::Lander];

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvKind::Pendulum => pendulum::spec(),
            EnvKind::Acrobot => acrobot::spec(),
            EnvKind::Lander => lander::spec(),
        }
    }

    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::Pendulum => Box::new(Pendulum::new()),
            EnvKind::Acrobot => Box::new(Acrobot::new()),
            EnvKind::Lander => Box::new(Lander::new()),
        }
    }

    /// The feature varied during training and its Gaussian `(mu, sigma)`.
    pub fn varied_feature(self) -> (ContextFeature, f64, f64) {
        let spec = self.spec();
        let name = match self {
            EnvKind::Pendulum => "g",
            EnvKind::Acrobot => "link_length_1",
            EnvKind::Lander => "gravity_y",
        };
        let feature = spec
            .feature(name)
            .cloned()
            .expect("varied feature is declared in the spec");
        let mu = feature.default_value;
        let sigma = 0.1 * mu.abs();
        (feature, mu, sigma)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Acrobot => "acrobot",
            EnvKind::Lander => "lander",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "acrobot" => Ok(EnvKind::Acrobot),
            "lander" => Ok(EnvKind::Lander),
            other => Err(Error::invalid(format!("unknown environment `{other}`"))),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionKind {
    /// Box `[low, high]^dim`.
    ContinuousBox {
        dim: usize,
        low: f64,
        high: f64,
    },
    Discrete {
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub base_obs_dim: usize,
    pub action: ActionKind,
    pub horizon: u64,
    pub features: Vec<ContextFeature>,
}

impl EnvSpec {
    pub fn feature(&self, name: &str) -> Option<&ContextFeature> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Value of `name` under `ctx`, falling back to the feature default.
    pub(crate) fn resolve(&self, ctx: &Context, name: &str) -> f64 {
        ctx.get(name).unwrap_or_else(|| {
            self.feature(name)
                .map(|f| f.default_value)
                .expect("feature declared in spec")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// A stateful contextual environment.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Sets the physics constants from `ctx` and draws a fresh initial
    /// state from `seed`. Returns the base (unaugmented) observation.
    fn reset(&mut self, ctx: &Context, seed: u64) -> Result<Vec<f64>>;

    fn step(&mut self, action: &Action) -> Result<StepResult>;

    /// Raw physical state, for trajectory dumps.
    fn state_vector(&self) -> Vec<f64>;

    /// Names of the entries of [`Environment::state_vector`].
    fn state_labels(&self) -> &'static [&'static str];
}

pub(crate) fn expect_discrete(action: &Action, n: usize) -> Result<usize> {
    match *action {
        Action::Discrete(a) if a < n => Ok(a),
        Action::Discrete(a) => Err(Error::invalid(format!("action {a} out of range 0..{n}"))),
        Action::Continuous(_) => Err(Error::invalid("expected a discrete action")),
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let r = (x + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs
    if r >= PI {
        r - two_pi
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
        for i in -1000..1000 {
            let w = wrap_angle(i as f64 * 0.37);
            assert!((-PI..PI).contains(&w));
        }
    }

    #[test]
    fn table_defaults() {
        assert_eq!(EnvKind::Pendulum.varied_feature().1, 10.0);
        assert_eq!(EnvKind::Acrobot.varied_feature().1, 1.0);
        assert_eq!(EnvKind::Lander.varied_feature().1, -10.0);
        assert_eq!(EnvKind::Lander.varied_feature().2, 1.0);
    }

    #[test]
    fn parse_names() {
        for kind in EnvKind::ALL {
            assert_eq!(kind.name().parse::<EnvKind>().unwrap(), kind);
        }
        assert!("cartpole".parse::<EnvKind>().is_err());
    }
}
