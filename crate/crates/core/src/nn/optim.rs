use serde::{Deserialize, Serialize};

use crate::env::NUM_ACTIONS;
use crate::error::{Error, Result};

use super::qnet::{Gradients, QValues};

/// Squared error on the taken action; other outputs get zero gradient.
pub fn mse_loss(q_pred: &QValues, action: usize, target: f64) -> (f64, QValues) {
    assert!(action < NUM_ACTIONS, "action index {action} out of range");
    let diff = q_pred[action] - target;
    let mut grad = [0.0; NUM_ACTIONS];
    grad[action] = 2.0 * diff;
    (diff * diff, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with moment buffers shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &Gradients) -> Result<()> {
        if params.len() != grads.0.len() {
            return Err(Error::Dimension {
                expected: params.len(),
                actual: grads.0.len(),
            });
        }
        for (p, g) in params.iter().zip(&grads.0) {
            if p.len() != g.len() {
                return Err(Error::Dimension {
                    expected: p.len(),
                    actual: g.len(),
                });
            }
        }
        if self.m.is_empty() {
            self.m = grads.0.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(&params).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::Dimension {
                expected: self.m.len(),
                actual: params.len(),
            });
        }

        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.into_iter().zip(&grads.0).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
