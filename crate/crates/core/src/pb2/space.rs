use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::Algorithm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperDim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Ordered box of tunable hyperparameters plus the point every member
/// starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    dims: Vec<HyperDim>,
    initial: Vec<f64>,
}

impl HyperparamSpace {
    pub fn new(dims: Vec<HyperDim>, initial: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid(
                "hyperparameter space needs at least one dimension",
            ));
        }
        for d in &dims {
            if !d.lower.is_finite() || !d.upper.is_finite() || d.lower >= d.upper {
                return Err(Error::invalid(format!("bad bounds for `{}`", d.name)));
            }
        }
        let space = Self { dims, initial };
        space.validate(&space.initial)?;
        Ok(space)
    }

    /// Learning rate, discount and soft-update rate.
    pub fn ddpg() -> Self {
        Self::new(
            vec![
                dim("learning_rate", 1e-5, 0.02),
                dim("gamma", 0.8, 0.999),
                dim("tau", 0.0, 0.99),
            ],
            vec![3e-5, 0.99, 0.005],
        )
        .expect("static space")
    }

    /// Learning rate, discount, entropy and value coefficients, gradient
    /// norm limit and GAE lambda.
    pub fn ppo() -> Self {
        Self::new(
            vec![
                dim("learning_rate", 1e-5, 0.02),
                dim("gamma", 0.8, 0.999),
                dim("ent_coef", 0.0, 0.5),
                dim("vf_coef", 0.0, 1.0),
                dim("max_grad_norm", 0.0, 1.0),
                dim("gae_lambda", 0.8, 0.999),
            ],
            vec![3e-5, 0.99, 0.0, 0.5, 0.5, 0.95],
        )
        .expect("static space")
    }

    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Ddpg => Self::ddpg(),
            Algorithm::Ppo => Self::ppo(),
        }
    }

    pub fn dims(&self) -> &[HyperDim] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        self.validate(&initial)?;
        self.initial = initial;
        Ok(self)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dims.iter().map(|d| d.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn contains(&self, hp: &[f64]) -> bool {
        hp.len() == self.dims.len()
            && hp
                .iter()
                .zip(&self.dims)
                .all(|(&v, d)| v.is_finite() && v >= d.lower && v <= d.upper)
    }

    pub fn validate(&self, hp: &[f64]) -> Result<()> {
        if hp.len() != self.dims.len() {
            return Err(Error::invalid(format!(
                "expected {} hyperparameters, got {}",
                self.dims.len(),
                hp.len()
            )));
        }
        for (&v, d) in hp.iter().zip(&self.dims) {
            if !(v.is_finite() && v >= d.lower && v <= d.upper) {
                return Err(Error::invalid(format!(
                    "{} = {v} outside [{}, {}]",
                    d.name, d.lower, d.upper
                )));
            }
        }
        Ok(())
    }

    /// Linear map of each dimension onto `[0, 1]`.
    pub fn normalize(&self, hp: &[f64]) -> Result<Vec<f64>> {
        self.validate(hp)?;
        Ok(hp
            .iter()
            .zip(&self.dims)
            .map(|(&v, d)| (v - d.lower) / (d.upper - d.lower))
            .collect())
    }

    pub fn denormalize(&self, unit: &[f64]) -> Result<Vec<f64>> {
        if unit.len() != self.dims.len() {
            return Err(Error::invalid("unit vector has the wrong dimension"));
        }
        if unit.iter().any(|&u| !(0.0..=1.0).contains(&u)) {
            return Err(Error::invalid(format!("{unit:?} is outside the unit box")));
        }
        Ok(unit
            .iter()
            .zip(&self.dims)
            .map(|(&u, d)| (d.lower + u * (d.upper - d.lower)).clamp(d.lower, d.upper))
            .collect())
    }

    pub fn to_map(&self, hp: &[f64]) -> BTreeMap<String, f64> {
        self.dims
            .iter()
            .zip(hp)
            .map(|(d, &v)| (d.name.clone(), v))
            .collect()
    }

    pub fn from_map(&self, map: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        if map.len() != self.dims.len() {
            return Err(Error::invalid(format!(
                "expected hyperparameters {:?}, got {:?}",
                self.names().collect::<Vec<_>>(),
                map.keys().collect::<Vec<_>>()
            )));
        }
        let hp = self
            .dims
            .iter()
            .map(|d| {
                map.get(&d.name)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("missing hyperparameter `{}`", d.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        self.validate(&hp)?;
        Ok(hp)
    }
}

fn dim(name: &str, lower: f64, upper: f64) -> HyperDim {
    HyperDim {
        name: name.to_string(),
        lower,
        upper,
    }
}
