//! Contexts: the physics parameters that select one instance of a
//! contextual environment.
//!
//! An [`InstanceSet`] is a seeded list of contexts in which a single
//! feature is drawn from a Gaussian. In [`Visibility::Visible`] mode the
//! context values are appended to the agent's observation.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Consecutive rejected draws after which sampling gives up.
const MAX_REJECTIONS: usize = 10_000;

/// A named physics parameter and the open interval of physically valid values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFeature {
    pub name: String,
    pub default_value: f64,
    /// Exclusive lower bound; `None` means unbounded.
    pub lower: Option<f64>,
    /// Exclusive upper bound; `None` means unbounded.
    pub upper: Option<f64>,
}

impl ContextFeature {
    pub fn new(name: &str, default_value: f64) -> Self {
        Self {
            name: name.to_string(),
            default_value,
            lower: None,
            upper: None,
        }
    }

    pub fn positive(name: &str, default_value: f64) -> Self {
        Self {
            lower: Some(0.0),
            ..Self::new(name, default_value)
        }
    }

    pub fn negative(name: &str, default_value: f64) -> Self {
        Self {
            upper: Some(0.0),
            ..Self::new(name, default_value)
        }
    }

    pub fn is_physical(&self, value: f64) -> bool {
        value.is_finite()
            && self.lower.is_none_or(|lo| value > lo)
            && self.upper.is_none_or(|hi| value < hi)
    }
}

/// Assignment of values to context features, kept in insertion order.
///
/// Only the features that are varied need to be present; an environment
/// falls back to its defaults for the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    assignments: Vec<(String, f64)>,
}

impl Context {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(name: &str, value: f64) -> Self {
        Self::empty().with(name, value)
    }

    /// Sets `name`, replacing an existing assignment in place.
    pub fn with(mut self, name: &str, value: f64) -> Self {
        match self.assignments.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.assignments.push((name.to_string(), value)),
        }
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.assignments
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.assignments.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Checks every assignment against the environment's feature list.
    pub fn validate(&self, features: &[ContextFeature]) -> Result<()> {
        for (name, value) in &self.assignments {
            let feature = features
                .iter()
                .find(|f| &f.name == name)
                .ok_or_else(|| Error::invalid(format!("unknown context feature `{name}`")))?;
            if !value.is_finite() {
                return Err(Error::invalid(format!(
                    "context feature `{name}` is not finite"
                )));
            }
            if !feature.is_physical(*value) {
                return Err(Error::invalid(format!(
                    "context feature `{name}` = {value} is outside its physical range"
                )));
            }
        }
        Ok(())
    }

    /// Values ordered by the environment's feature list, skipping features
    /// this context does not assign.
    pub fn ordered_values(&self, features: &[ContextFeature]) -> Vec<f64> {
        features.iter().filter_map(|f| self.get(&f.name)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    #[default]
    Hidden,
    Visible,
}

impl std::str::FromStr for Visibility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hidden" => Ok(Visibility::Hidden),
            "visible" => Ok(Visibility::Visible),
            other => Err(Error::invalid(format!("unknown visibility `{other}`"))),
        }
    }
}

impl std::fmt::Display for Visibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Visibility::Hidden => "hidden",
            Visibility::Visible => "visible",
        })
    }
}

/// Appends the context's values to `obs` when visible. Values are raw,
/// in the context's assignment order.
pub fn augment_observation(obs: &[f64], ctx: &Context, mode: Visibility) -> Vec<f64> {
    match mode {
        Visibility::Hidden => obs.to_vec(),
        Visibility::Visible => obs
            .iter()
            .copied()
            .chain(ctx.iter().map(|(_, v)| v))
            .collect(),
    }
}

/// Like [`augment_observation`], but each appended value is divided by its
/// feature's default magnitude and emitted in feature-list order.
pub fn augment_observation_normalized(
    obs: &[f64],
    ctx: &Context,
    mode: Visibility,
    features: &[ContextFeature],
) -> Vec<f64> {
    match mode {
        Visibility::Hidden => obs.to_vec(),
        Visibility::Visible => {
            let mut out = obs.to_vec();
            for f in features {
                if let Some(v) = ctx.get(&f.name) {
                    let scale = if f.default_value != 0.0 {
                        f.default_value.abs()
                    } else {
                        1.0
                    };
                    out.push(v / scale);
                }
            }
            out
        }
    }
}

/// A seeded set of contexts varying a single feature.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    pub feature: ContextFeature,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
    contexts: Vec<Context>,
}

/// On-disk form of an [`InstanceSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSetFile {
    pub feature: String,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
    pub values: Vec<f64>,
}

/// Draws `n` values of `feature` from `Normal(mu, sigma)`, rejecting and
/// redrawing non-physical values.
pub fn sample_instance_set(
    feature: &ContextFeature,
    mu: f64,
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<InstanceSet> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("instance set size must be at least 1"));
    }
    if !mu.is_finite() {
        return Err(Error::invalid("mu must be finite"));
    }
    let normal = Normal::new(mu, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    let mut contexts = Vec::with_capacity(n);
    while contexts.len() < n {
        let mut rejected = 0;
        let value = loop {
            let v = normal.sample(&mut rng);
            if feature.is_physical(v) {
                break v;
            }
            rejected += 1;
            if rejected >= MAX_REJECTIONS {
                return Err(Error::invalid(format!(
                    "Normal({mu}, {sigma}) almost never yields a physical `{}`",
                    feature.name
                )));
            }
        };
        contexts.push(Context::single(&feature.name, value));
    }
    Ok(InstanceSet {
        feature: feature.clone(),
        mu,
        sigma,
        seed,
        contexts,
    })
}

impl InstanceSet {
    /// A one-element set holding the feature's default value.
    pub fn default_only(feature: &ContextFeature) -> Self {
        Self {
            feature: feature.clone(),
            mu: feature.default_value,
            sigma: 0.0,
            seed: 0,
            contexts: vec![Context::single(&feature.name, feature.default_value)],
        }
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn values(&self) -> Vec<f64> {
        self.contexts
            .iter()
            .map(|c| {
                c.get(&self.feature.name)
                    .unwrap_or(self.feature.default_value)
            })
            .collect()
    }

    /// Context for the `episode`-th episode when cycling in fixed order.
    pub fn round_robin(&self, episode: u64) -> &Context {
        &self.contexts[(episode % self.contexts.len() as u64) as usize]
    }

    /// A fresh draw from the set's generating distribution.
    pub fn resample(&self, rng: &mut rng::Rng) -> Context {
        if self.sigma == 0.0 {
            return Context::single(&self.feature.name, self.mu);
        }
        let normal = Normal::new(self.mu, self.sigma).expect("validated at construction");
        loop {
            let v = normal.sample(rng);
            if self.feature.is_physical(v) {
                return Context::single(&self.feature.name, v);
            }
        }
    }

    /// A uniformly chosen member of the set.
    pub fn pick(&self, rng: &mut rng::Rng) -> &Context {
        &self.contexts[rng.random_range(0..self.contexts.len())]
    }

    pub fn to_file(&self) -> InstanceSetFile {
        InstanceSetFile {
            feature: self.feature.name.clone(),
            mu: self.mu,
            sigma: self.sigma,
            seed: self.seed,
            values: self.values(),
        }
    }

    /// Rebuilds a set from its file form; `feature` supplies the bounds and
    /// must carry the same name.
    pub fn from_file(file: &InstanceSetFile, feature: &ContextFeature) -> Result<Self> {
        if file.feature != feature.name {
            return Err(Error::invalid(format!(
                "instance file varies `{}`, expected `{}`",
                file.feature, feature.name
            )));
        }
        if file.values.is_empty() {
            return Err(Error::invalid("instance file has no values"));
        }
        let contexts = file
            .values
            .iter()
            .map(|&v| {
                if feature.is_physical(v) {
                    Ok(Context::single(&feature.name, v))
                } else {
                    Err(Error::invalid(format!(
                        "non-physical value {v} in instance file"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            feature: feature.clone(),
            mu: file.mu,
            sigma: file.sigma,
            seed: file.seed,
            contexts,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }
}
