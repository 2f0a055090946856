use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Fully connected layer. `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    /// He-style uniform initialization, `U(−√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn he_uniform(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs, activation);
        for w in &mut layer.weights {
            *w = rng.gen_range(-limit..limit);
        }
        layer
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        let mut out = self.biases.clone();
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            *o += row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
            if self.activation == Activation::Relu && *o < 0.0 {
                *o = 0.0;
            }
        }
        out
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    ///
    /// `y` is this layer's post-activation output from the forward pass. The
    /// ReLU derivative is taken as 0 wherever the output is 0.
    pub fn backward(&self, x: &[f64], y: &[f64], grad_y: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) -> Vec<f64> {
        let mut grad_x = vec![0.0; self.inputs];
        for o in 0..self.outputs {
            let mut g = grad_y[o];
            if self.activation == Activation::Relu && y[o] <= 0.0 {
                g = 0.0;
            }
            if g == 0.0 {
                continue;
            }
            grad_b[o] += g;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grad_w[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                grad_x[i] += g * row[i];
            }
        }
        grad_x
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// `sizes` lists every width from input to output. Hidden layers use
    /// `hidden`, the final layer is linear.
    pub fn new(sizes: &[usize], hidden: Activation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output widths");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Identity } else { hidden };
                DenseLayer::he_uniform(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |a, l| l.forward(&a))
    }

    /// Activations of every layer, starting with the input itself.
    pub fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.to_vec());
        for l in &self.layers {
            let next = l.forward(trace.last().expect("non-empty"));
            trace.push(next);
        }
        trace
    }

    /// Backpropagates `grad_out` through a recorded trace. `grads` holds this
    /// network's tensors in [`params`](Self::params) order.
    pub fn backward(&self, trace: &[Vec<f64>], grad_out: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gw, gb) = grads[2 * i..2 * i + 2].split_at_mut(1);
            g = layer.backward(&trace[i], &trace[i + 1], &g, &mut gw[0], &mut gb[0]);
        }
        g
    }

    /// Weights then biases, layer by layer.
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn layer_forward_by_hand() {
        let layer = DenseLayer {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 2.0, -3.0, 1.0],
            biases: vec![0.5, 0.0],
            activation: Activation::Relu,
        };
        assert_eq!(layer.forward(&[1.0, 1.0]), vec![3.5, 0.0]);
    }

    #[test]
    fn he_init_within_limit() {
        let mut rng = seeded(1);
        let l = DenseLayer::he_uniform(6, 64, Activation::Relu, &mut rng);
        let limit = 1.0f64;
        assert!(l.weights.iter().all(|w| w.abs() < limit));
        assert!(l.biases.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn mlp_shapes() {
        let mut rng = seeded(0);
        let m = Mlp::new(&[6, 64, 64, 64, 3], Activation::Relu, &mut rng);
        assert_eq!(m.input_dim(), 6);
        assert_eq!(m.output_dim(), 3);
        assert_eq!(m.layers.len(), 4);
        assert_eq!(m.layers[3].activation, Activation::Identity);
        assert_eq!(m.param_count(), 6 * 64 + 64 + 2 * (64 * 64 + 64) + 64 * 3 + 3);
        assert!(m.check_input(&[0.0; 5]).is_err());
    }
}
