use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::GradBundle;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected network with parameters in one flat buffer.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs. Its weight
/// block is stored row-major as `[out][in]`, followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<f64>,
}

/// Activations recorded by a batched forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `activations[0]` is the input batch, the last entry is the output.
    activations: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.activations.last().expect("tape holds input").view()
    }

    pub fn input(&self) -> ArrayView2<'_, f64> {
        self.activations[0].view()
    }
}

impl Mlp {
    /// Builds a network with parameters drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        let mut offset = 0;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_out * (fan_in + 1)] {
                *p = rng.random_range(-bound..bound);
            }
            offset += fan_out * (fan_in + 1);
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let count = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![0.0; count],
        })
    }

    /// Rebuilds a network from an explicit parameter buffer.
    pub fn from_params(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        if params.len() != net.params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes[..layer + 1]
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    /// Weight matrix `[out][in]` and bias of `layer`.
    pub fn layer(&self, layer: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.layer_offset(layer);
        let w =
            ArrayView2::from_shape((fan_out, fan_in), &self.params[off..off + fan_out * fan_in])
                .expect("layout");
        let b =
            ArrayView1::from(&self.params[off + fan_out * fan_in..off + fan_out * (fan_in + 1)]);
        (w, b)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let tape = self.forward_batch(x)?;
        Ok(tape.output().row(0).to_vec())
    }

    /// Forward pass over a `[batch][input_dim]` matrix, keeping activations.
    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Tape> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} columns, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(inputs.to_owned());
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let prev = activations.last().unwrap();
            let mut z = Array2::<f64>::zeros((prev.nrows(), w.nrows()));
            z.rows_mut().into_iter().for_each(|mut row| row.assign(&b));
            general_mat_mul(1.0, prev, &w.t(), 1.0, &mut z);
            let act = self.activation(l);
            if act != Activation::Identity {
                z.mapv_inplace(|v| act.apply(v));
            }
            activations.push(z);
        }
        Ok(Tape { activations })
    }

    /// Reverse-mode pass. `upstream` is `dLoss/dOutput` per batch row.
    /// Parameter gradients are summed over the batch into `grads`; the
    /// gradient with respect to the inputs is returned.
    pub fn backward_batch(
        &self,
        tape: &Tape,
        upstream: ArrayView2<'_, f64>,
        grads: &mut GradBundle,
    ) -> Result<Array2<f64>> {
        let out = tape.output();
        if upstream.dim() != out.dim() {
            return Err(Error::invalid(format!(
                "upstream gradient shape {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::invalid("gradient bundle does not match network"));
        }
        let mut delta = upstream.to_owned();
        for l in (0..self.num_layers()).rev() {
            let act = self.activation(l);
            if act != Activation::Identity {
                let y = &tape.activations[l + 1];
                ndarray::Zip::from(&mut delta)
                    .and(y)
                    .for_each(|d, &yv| *d *= act.derivative_from_output(yv));
            }
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.layer_offset(l);
            let prev = &tape.activations[l];
            {
                let block = &mut grads.values_mut()[off..off + fan_out * (fan_in + 1)];
                let (gw, gb) = block.split_at_mut(fan_out * fan_in);
                let mut gw = ArrayViewMut2::from_shape((fan_out, fan_in), gw).expect("layout");
                general_mat_mul(1.0, &delta.t(), prev, 1.0, &mut gw);
                for (g, s) in gb.iter_mut().zip(delta.sum_axis(Axis(0))) {
                    *g += s;
                }
            }
            let (w, _) = self.layer(l);
            let mut next = Array2::<f64>::zeros((delta.nrows(), fan_in));
            general_mat_mul(1.0, &delta, &w, 0.0, &mut next);
            delta = next;
        }
        Ok(delta)
    }

    /// Gradient of `upstream · f(input)` with respect to the parameters.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<GradBundle> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let tape = self.forward_batch(x)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        let mut grads = GradBundle::zeros(self.params.len());
        self.backward_batch(&tape, up, &mut grads)?;
        Ok(grads)
    }

    /// Gradient of `upstream · f(input)` with respect to the input.
    pub fn input_gradient(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let tape = self.forward_batch(x)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        let mut grads = GradBundle::zeros(self.params.len());
        let dx = self.backward_batch(&tape, up, &mut grads)?;
        Ok(dx.slice(s![0, ..]).to_vec())
    }

    /// `target <- tau * self + (1 - tau) * target`, element-wise.
    pub fn soft_update_into(&self, target: &mut Mlp, tau: f64) -> Result<()> {
        if target.sizes != self.sizes {
            return Err(Error::invalid(
                "soft update between differently shaped networks",
            ));
        }
        soft_update(&self.params, &mut target.params, tau);
        Ok(())
    }
}

/// Polyak averaging of `online` into `target`.
pub fn soft_update(online: &[f64], target: &mut [f64], tau: f64) {
    debug_assert_eq!(online.len(), target.len());
    if tau == 0.0 {
        return;
    }
    if tau == 1.0 {
        target.copy_from_slice(online);
        return;
    }
    for (t, &o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn identity_network() {
        let mut net = Mlp::zeros(&[3, 3], Activation::Tanh, Activation::Identity).unwrap();
        for i in 0..3 {
            net.params_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(
            net.forward(&[1.0, -2.0, 0.5]).unwrap(),
            vec![1.0, -2.0, 0.5]
        );
    }

    #[test]
    fn bias_only() {
        let mut net = Mlp::zeros(&[2, 2], Activation::Tanh, Activation::Tanh).unwrap();
        net.params_mut()[4] = 0.3;
        net.params_mut()[5] = -1.0;
        let y = net.forward(&[5.0, 7.0]).unwrap();
        assert_eq!(y, vec![0.3f64.tanh(), (-1.0f64).tanh()]);
    }

    #[test]
    fn dimension_checks() {
        let net = Mlp::new(
            &[3, 4, 2],
            Activation::Tanh,
            Activation::Identity,
            &mut rng::seeded(0),
        )
        .unwrap();
        assert!(net.forward(&[1.0, 2.0]).is_err());
        assert!(net.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
        assert!(Mlp::zeros(&[3], Activation::Tanh, Activation::Identity).is_err());
        assert!(Mlp::zeros(&[3, 0, 1], Activation::Tanh, Activation::Identity).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let net = Mlp::new(
            &[3, 5, 2],
            Activation::Tanh,
            Activation::Identity,
            &mut rng::seeded(1),
        )
        .unwrap();
        let g = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_squared_loss_closed_form() {
        // L = |Wx + b - y|^2, dL/dW = 2 (Wx + b - y) x^T, dL/db = 2 (Wx + b - y)
        let net = Mlp::new(
            &[3, 2],
            Activation::Tanh,
            Activation::Identity,
            &mut rng::seeded(2),
        )
        .unwrap();
        let x = [0.5, -1.0, 2.0];
        let y = [0.3, -0.7];
        let out = net.forward(&x).unwrap();
        let resid: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
        let up: Vec<f64> = resid.iter().map(|r| 2.0 * r).collect();
        let g = net.backward(&x, &up).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((g.values()[i * 3 + j] - 2.0 * resid[i] * x[j]).abs() < 1e-12);
            }
            assert!((g.values()[6 + i] - 2.0 * resid[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_matches_single() {
        let net = Mlp::new(
            &[2, 8, 8, 3],
            Activation::Relu,
            Activation::Tanh,
            &mut rng::seeded(3),
        )
        .unwrap();
        let xs = Array2::from_shape_fn((4, 2), |(i, j)| (i as f64 - 1.5) * 0.3 + j as f64 * 0.7);
        let tape = net.forward_batch(xs.view()).unwrap();
        for (i, row) in xs.rows().into_iter().enumerate() {
            let single = net.forward(row.as_slice().unwrap()).unwrap();
            for (a, b) in single.iter().zip(tape.output().row(i)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn soft_update_cases() {
        let online = [3.0, 3.0];
        let mut target = [1.0, 1.0];
        soft_update(&online, &mut target, 0.0);
        assert_eq!(target, [1.0, 1.0]);
        soft_update(&online, &mut target, 0.5);
        assert_eq!(target, [2.0, 2.0]);
        soft_update(&online, &mut target, 1.0);
        assert_eq!(target, online);
    }
}
