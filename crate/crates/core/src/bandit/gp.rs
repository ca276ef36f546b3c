use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Only the most recent observations are conditioned on.
pub const MAX_OBSERVATIONS: usize = 64;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

const LENGTHSCALE_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6];
const EPSILON_GRID: [f64; 5] = [0.0, 0.05, 0.1, 0.2, 0.4];
const NOISE_GRID: [f64; 4] = [1e-3, 0.01, 0.1, 0.5];
const SIGNAL_GRID: [f64; 3] = [0.5, 1.0, 2.0];
const ARD_PASSES: usize = 2;

/// One bandit observation: time, point in the unit box, reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Hyperparameters of the time-varying squared-exponential kernel
///
/// `k((t,x),(t',x')) = s * exp(-0.5 * sum_d ((x_d - x'_d) / l_d)^2) * (1 - eps)^(|t - t'| / 2)`
///
/// with independent Gaussian noise of variance `noise` on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub epsilon: f64,
    pub noise: f64,
    pub signal_var: f64,
}

impl KernelParams {
    pub fn isotropic(
        dim: usize,
        lengthscale: f64,
        epsilon: f64,
        noise: f64,
        signal_var: f64,
    ) -> Self {
        Self {
            lengthscales: vec![lengthscale; dim],
            epsilon,
            noise,
            signal_var,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .lengthscales
            .iter()
            .any(|&l| !(l > 0.0 && l.is_finite()))
        {
            return Err(Error::invalid("lengthscales must be positive"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "epsilon {} outside [0, 1)",
                self.epsilon
            )));
        }
        if !(self.noise >= 0.0 && self.signal_var > 0.0) {
            return Err(Error::invalid(
                "noise must be non-negative and signal variance positive",
            ));
        }
        Ok(())
    }

    /// Covariance of the latent function between two inputs.
    pub fn eval(&self, t1: f64, x1: &[f64], t2: f64, x2: &[f64]) -> f64 {
        let sq: f64 = x1
            .iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| ((a - b) / l).powi(2))
            .sum();
        let decay = if self.epsilon == 0.0 {
            1.0
        } else {
            (1.0 - self.epsilon).powf((t1 - t2).abs() / 2.0)
        };
        self.signal_var * (-0.5 * sq).exp() * decay
    }
}

/// Posterior mean and latent variance at one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Gaussian process conditioned on a set of observations.
///
/// Targets are held internally in standardized units; every public
/// prediction is mapped back to the units of the observations.
#[derive(Debug, Clone)]
pub struct GpModel {
    dim: usize,
    params: KernelParams,
    inputs: Vec<(f64, Vec<f64>)>,
    targets: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    degenerate: bool,
    jitter: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    lml: f64,
}

impl GpModel {
    /// Prior-only model: zero mean, variance `signal_var`.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            params: KernelParams::isotropic(dim, 0.2, 0.0, 0.1, 1.0),
            inputs: Vec::new(),
            targets: DVector::zeros(0),
            y_mean: 0.0,
            y_scale: 1.0,
            degenerate: false,
            jitter: 0.0,
            chol_l: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            lml: 0.0,
        }
    }

    /// Conditions on `obs` exactly as given: no standardization, no
    /// hyperparameter search, no window.
    pub fn new(params: KernelParams, obs: &[Observation]) -> Result<Self> {
        let dim = params.lengthscales.len();
        check_observations(obs, dim)?;
        params.validate()?;
        let inputs = obs.iter().map(|o| (o.t, o.x.clone())).collect();
        let y = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.y));
        Self::condition(dim, params, inputs, y, 0.0, 1.0, false)
    }

    /// Standardizes the latest [`MAX_OBSERVATIONS`] targets and picks kernel
    /// hyperparameters by maximizing the log marginal likelihood over a
    /// grid, followed by per-dimension lengthscale refinement.
    pub fn fit(obs: &[Observation], dim: usize) -> Result<Self> {
        check_observations(obs, dim)?;
        if obs.is_empty() {
            return Ok(Self::empty(dim));
        }
        let window = &obs[obs.len().saturating_sub(MAX_OBSERVATIONS)..];
        let n = window.len() as f64;
        let mean = window.iter().map(|o| o.y).sum::<f64>() / n;
        let var = window.iter().map(|o| (o.y - mean).powi(2)).sum::<f64>() / n;
        let (scale, degenerate) = if var.sqrt() > 1e-12 {
            (var.sqrt(), false)
        } else {
            (1.0, true)
        };
        let inputs: Vec<(f64, Vec<f64>)> = window.iter().map(|o| (o.t, o.x.clone())).collect();
        let y = DVector::from_iterator(window.len(), window.iter().map(|o| (o.y - mean) / scale));

        let try_fit = |p: KernelParams| {
            Self::condition(dim, p, inputs.clone(), y.clone(), mean, scale, degenerate).ok()
        };
        let mut best: Option<Self> = None;
        let better = |cand: &Option<Self>, best: &Option<Self>| match (cand, best) {
            (Some(c), Some(b)) => c.lml > b.lml,
            (Some(_), None) => true,
            _ => false,
        };
        if degenerate {
            // constant targets carry no information about the kernel
            best = try_fit(KernelParams::isotropic(dim, 0.2, 0.0, 1.0, 1.0));
        } else {
            for &l in &LENGTHSCALE_GRID {
                for &eps in &EPSILON_GRID {
                    for &noise in &NOISE_GRID {
                        for &s in &SIGNAL_GRID {
                            let cand = try_fit(KernelParams::isotropic(dim, l, eps, noise, s));
                            if better(&cand, &best) {
                                best = cand;
                            }
                        }
                    }
                }
            }
            if dim > 1 {
                for _ in 0..ARD_PASSES {
                    for d in 0..dim {
                        for factor in [0.5, 2.0] {
                            let Some(current) = &best else { break };
                            let mut p = current.params.clone();
                            p.lengthscales[d] *= factor;
                            let cand = try_fit(p);
                            if better(&cand, &best) {
                                best = cand;
                            }
                        }
                    }
                }
            }
        }
        best.ok_or_else(|| {
            Error::numeric("no kernel hyperparameters gave a positive-definite covariance")
        })
    }

    fn condition(
        dim: usize,
        params: KernelParams,
        inputs: Vec<(f64, Vec<f64>)>,
        targets: DVector<f64>,
        y_mean: f64,
        y_scale: f64,
        degenerate: bool,
    ) -> Result<Self> {
        let n = inputs.len();
        let mut k = DMatrix::from_fn(n, n, |i, j| {
            params.eval(inputs[i].0, &inputs[i].1, inputs[j].0, &inputs[j].1)
        });
        for i in 0..n {
            k[(i, i)] += params.noise;
        }
        let mut jitter = 0.0;
        let chol = loop {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            if let Some(c) = kj.cholesky() {
                break c;
            }
            jitter = if jitter == 0.0 {
                JITTER_START
            } else {
                jitter * 10.0
            };
            if jitter > JITTER_MAX * (1.0 + 1e-9) {
                return Err(Error::numeric(format!(
                    "covariance of {n} points not positive definite even with jitter {JITTER_MAX}"
                )));
            }
        };
        let alpha = chol.solve(&targets);
        let l = chol.unpack();
        let log_det_half: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
        let lml = -0.5 * targets.dot(&alpha)
            - log_det_half
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        if !lml.is_finite() {
            return Err(Error::numeric("log marginal likelihood is not finite"));
        }
        Ok(Self {
            dim,
            params,
            inputs,
            targets,
            y_mean,
            y_scale,
            degenerate,
            jitter,
            chol_l: l,
            alpha,
            lml,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Log marginal likelihood of the (standardized) targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// True when the targets had zero spread and unit scaling was used.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn inputs(&self) -> &[(f64, Vec<f64>)] {
        &self.inputs
    }

    /// Posterior of the latent function, in observation units.
    pub fn predict(&self, t: f64, x: &[f64]) -> Posterior {
        let prior = self.params.signal_var;
        if self.inputs.is_empty() {
            return Posterior {
                mean: self.y_mean,
                variance: prior * self.y_scale * self.y_scale,
            };
        }
        let kstar = DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|(ti, xi)| self.params.eval(t, x, *ti, xi)),
        );
        let mean = kstar.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&kstar)
            .expect("cholesky factor has a positive diagonal");
        let variance = (prior - v.dot(&v)).max(0.0);
        Posterior {
            mean: self.y_mean + self.y_scale * mean,
            variance: variance * self.y_scale * self.y_scale,
        }
    }

    /// Same kernel, with extra points whose targets are set to the current
    /// posterior mean. Shrinks variance near pending evaluations without
    /// moving the mean.
    pub fn with_hallucinated(&self, t: f64, points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Ok(self.clone());
        }
        let mut inputs = self.inputs.clone();
        let mut targets: Vec<f64> = self.targets.iter().copied().collect();
        for p in points {
            if p.len() != self.dim {
                return Err(Error::invalid("pending point has the wrong dimension"));
            }
            let post = self.predict(t, p);
            targets.push((post.mean - self.y_mean) / self.y_scale);
            inputs.push((t, p.clone()));
        }
        let n = targets.len();
        Self::condition(
            self.dim,
            self.params.clone(),
            inputs,
            DVector::from_vec(targets),
            self.y_mean,
            self.y_scale,
            self.degenerate,
        )
        .inspect(|m| debug_assert_eq!(m.len(), n))
    }
}

fn check_observations(obs: &[Observation], dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("bandit dimension must be positive"));
    }
    for o in obs {
        if o.x.len() != dim {
            return Err(Error::invalid(format!(
                "observation has {} dims, expected {dim}",
                o.x.len()
            )));
        }
        if !o.y.is_finite() || !o.t.is_finite() || o.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite bandit observation"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: f64, x: f64, y: f64) -> Observation {
        Observation { t, x: vec![x], y }
    }

    #[test]
    fn interpolates_with_small_noise() {
        let p = KernelParams::isotropic(1, 0.3, 0.0, 1e-8, 1.0);
        let m = GpModel::new(p, &[obs(0.0, 0.2, 1.0), obs(0.0, 0.8, -1.0)]).unwrap();
        let a = m.predict(0.0, &[0.2]);
        assert!((a.mean - 1.0).abs() < 1e-5);
        assert!(a.variance < 1e-6);
        let far = m.predict(0.0, &[10.0]);
        assert!(far.mean.abs() < 1e-9);
        assert!((far.variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn time_decay_forgets() {
        let p = KernelParams::isotropic(1, 0.3, 0.4, 1e-4, 1.0);
        let m = GpModel::new(p, &[obs(0.0, 0.5, 2.0)]).unwrap();
        let now = m.predict(0.0, &[0.5]).mean;
        let later = m.predict(10.0, &[0.5]).mean;
        assert!(later.abs() < now.abs() * 0.1);
    }

    #[test]
    fn duplicate_points_need_jitter() {
        let p = KernelParams::isotropic(1, 0.3, 0.0, 0.0, 1.0);
        let m = GpModel::new(p, &[obs(0.0, 0.5, 1.0), obs(0.0, 0.5, 1.0)]).unwrap();
        assert!(m.jitter() > 0.0 && m.jitter() <= JITTER_MAX);
    }

    #[test]
    fn constant_targets_are_flagged() {
        let data: Vec<_> = (0..5).map(|i| obs(i as f64, 0.1 * i as f64, 3.0)).collect();
        let m = GpModel::fit(&data, 1).unwrap();
        assert!(m.is_degenerate());
        assert!((m.predict(5.0, &[0.3]).mean - 3.0).abs() < 1e-9);
    }

    #[test]
    fn window_keeps_latest() {
        let data: Vec<_> = (0..100)
            .map(|i| obs(i as f64, (i % 10) as f64 / 10.0, (i as f64).sin()))
            .collect();
        let m = GpModel::fit(&data, 1).unwrap();
        assert_eq!(m.len(), MAX_OBSERVATIONS);
        assert_eq!(m.inputs()[0].0, 36.0);
    }

    #[test]
    fn hallucination_keeps_mean_shrinks_variance() {
        let data: Vec<_> = (0..6)
            .map(|i| obs(0.0, i as f64 / 5.0, (i as f64).cos()))
            .collect();
        let m = GpModel::fit(&data, 1).unwrap();
        let x = [0.55];
        let before = m.predict(1.0, &x);
        let h = m.with_hallucinated(1.0, &[x.to_vec()]).unwrap();
        let after = h.predict(1.0, &x);
        assert!((after.mean - before.mean).abs() < 1e-6 * (1.0 + before.mean.abs()));
        assert!(after.variance < before.variance);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GpModel::fit(&[obs(0.0, 0.1, f64::NAN)], 1).is_err());
        assert!(GpModel::fit(
            &[Observation {
                t: 0.0,
                x: vec![0.1, 0.2],
                y: 1.0
            }],
            1
        )
        .is_err());
        assert!(KernelParams::isotropic(1, 0.0, 0.0, 0.1, 1.0)
            .validate()
            .is_err());
    }
}
