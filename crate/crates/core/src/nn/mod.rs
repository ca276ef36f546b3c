//! Dense networks with hand-written reverse-mode gradients.

mod adam;
mod mlp;
pub mod snapshot;

pub use adam::{Adam, AdamConfig};
pub use mlp::{soft_update, Activation, Mlp, Tape};

use crate::error::{Error, Result};

/// Gradients laid out exactly like the owning network's parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    values: Vec<f64>,
}

impl GradBundle {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Global L2 norm.
    pub fn norm(&self) -> f64 {
        self.sum_of_squares().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Scales `grads` so its global norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut GradBundle, max_norm: f64) -> f64 {
    clip_global_norm_many(&mut [grads], max_norm)
}

/// Joint clipping over several bundles, as if they were concatenated.
pub fn clip_global_norm_many(bundles: &mut [&mut GradBundle], max_norm: f64) -> f64 {
    let norm = bundles
        .iter()
        .map(|b| b.sum_of_squares())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let factor = if norm > 0.0 { max_norm / norm } else { 0.0 };
        for b in bundles.iter_mut() {
            b.scale(factor);
        }
    }
    norm
}

pub(crate) fn check_finite(grads: &GradBundle) -> Result<()> {
    if grads.is_finite() {
        Ok(())
    } else {
        Err(Error::numeric("non-finite gradient"))
    }
}
