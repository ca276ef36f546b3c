use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gp::{GpModel, Observation};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Exploration weight of the upper confidence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Kappa {
    Constant(f64),
    /// `sqrt(2 log(d t^2 pi^2 / (6 delta)))`, growing slowly with time.
    Schedule {
        delta: f64,
    },
}

impl Kappa {
    pub fn at(self, t: f64, dim: usize) -> f64 {
        match self {
            Kappa::Constant(k) => k,
            Kappa::Schedule { delta } => {
                let t = t.max(1.0);
                let arg = dim as f64 * t * t * std::f64::consts::PI.powi(2) / (6.0 * delta);
                (2.0 * arg.max(1.0).ln()).sqrt()
            }
        }
    }
}

impl Default for Kappa {
    fn default() -> Self {
        Kappa::Constant(2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub kappa: Kappa,
    /// Candidates drawn uniformly from the unit box.
    pub uniform_candidates: usize,
    /// Candidates drawn around the incumbent.
    pub local_candidates: usize,
    /// Standard deviation of the local perturbations.
    pub local_scale: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            kappa: Kappa::default(),
            uniform_candidates: 1000,
            local_candidates: 200,
            local_scale: 0.1,
        }
    }
}

/// Upper confidence bound of the model at `(t, x)`.
pub fn ucb(model: &GpModel, t: f64, x: &[f64], kappa: f64) -> f64 {
    let p = model.predict(t, x);
    p.mean + kappa * p.std()
}

/// The observed point with the highest posterior mean at time `t`.
pub fn incumbent(model: &GpModel, t: f64) -> Option<Vec<f64>> {
    model
        .inputs()
        .iter()
        .map(|(_, x)| (model.predict(t, x).mean, x))
        .fold(None, |best: Option<(f64, &Vec<f64>)>, (m, x)| match best {
            Some((bm, _)) if bm >= m => best,
            _ => Some((m, x)),
        })
        .map(|(_, x)| x.clone())
}

/// Maximizes the UCB at time `t` over random candidates in the unit box.
/// `pending` points (already chosen, not yet observed) are conditioned on
/// with their posterior mean so that batch suggestions spread out.
pub fn suggest(
    model: &GpModel,
    t: f64,
    pending: &[Vec<f64>],
    cfg: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let dim = model.dim();
    if cfg.uniform_candidates + cfg.local_candidates == 0 {
        return Err(Error::invalid("acquisition needs at least one candidate"));
    }
    if model.is_empty() && pending.is_empty() {
        return Ok((0..dim).map(|_| rng.random::<f64>()).collect());
    }
    let model = model.with_hallucinated(t, pending)?;
    let kappa = cfg.kappa.at(t, dim);

    let mut candidates: Vec<Vec<f64>> = (0..cfg.uniform_candidates)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    if let Some(best) = incumbent(&model, t) {
        let normal =
            Normal::new(0.0, cfg.local_scale).map_err(|e| Error::invalid(e.to_string()))?;
        candidates.extend((0..cfg.local_candidates).map(|_| {
            best.iter()
                .map(|&b| (b + normal.sample(rng)).clamp(0.0, 1.0))
                .collect::<Vec<f64>>()
        }));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for c in candidates {
        let score = ucb(&model, t, &c, kappa);
        if !score.is_finite() {
            return Err(Error::numeric("acquisition value is not finite"));
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, c));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// Fits a model on `obs` and suggests the next point for time `t`.
pub fn fit_and_suggest(
    obs: &[Observation],
    dim: usize,
    t: f64,
    pending: &[Vec<f64>],
    cfg: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let model = GpModel::fit(obs, dim)?;
    suggest(&model, t, pending, cfg, rng)
}
