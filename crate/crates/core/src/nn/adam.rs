use serde::{Deserialize, Serialize};

use super::{check_finite, GradBundle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected adaptive-moment optimizer state for one parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) t: u64,
}

impl Adam {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &GradBundle, lr: f64) -> Result<()> {
        if !lr.is_finite() || lr <= 0.0 {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid("optimizer state does not match parameters"));
        }
        check_finite(grads)?;
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads.values())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    pub(crate) fn from_parts(config: AdamConfig, m: Vec<f64>, v: Vec<f64>, t: u64) -> Result<Self> {
        if m.len() != v.len() {
            return Err(Error::invalid("moment buffers differ in length"));
        }
        Ok(Self { config, m, v, t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 3.0];
        adam.step(&mut p, &GradBundle::zeros(3), 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.3, -7.0, 1e-3] {
            let mut adam = Adam::new(1, AdamConfig::default());
            let mut p = vec![0.0];
            adam.step(&mut p, &GradBundle::from_vec(vec![g]), 0.01)
                .unwrap();
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
            let expected = -0.01 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15);
            assert!((p[0].abs() - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn two_steps_match_scalar_reimplementation() {
        let (b1, b2, eps, lr, g) = (0.9f64, 0.999f64, 1e-8, 0.05, 0.7);
        let mut adam = Adam::new(1, AdamConfig::default());
        let mut p = vec![1.0];
        let (mut m, mut v, mut x) = (0.0, 0.0, 1.0);
        for t in 1..=2 {
            adam.step(&mut p, &GradBundle::from_vec(vec![g]), lr)
                .unwrap();
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p[0] - x).abs() < 1e-15);
        assert_eq!(adam.steps(), 2);
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut adam = Adam::new(1, AdamConfig::default());
        let mut p = vec![0.0];
        let err = adam.step(&mut p, &GradBundle::from_vec(vec![f64::NAN]), 0.1);
        assert!(matches!(err, Err(Error::Numeric(_))));
        assert!(adam
            .step(&mut p, &GradBundle::from_vec(vec![1.0]), 0.0)
            .is_err());
    }
}
