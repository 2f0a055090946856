use crate::env::{Features, NUM_ACTIONS, STATE_DIM};
use crate::error::Result;
use crate::rng::seeded;

use super::layer::{Activation, Mlp};

/// Hidden widths of the plain Q-network.
pub const HIDDEN: [usize; 3] = [64, 64, 64];
/// Hidden widths of the dueling trunk and of each head.
pub const DUELING_TRUNK: [usize; 2] = [64, 64];
pub const DUELING_HEAD: [usize; 1] = [64];

pub type QValues = [f64; NUM_ACTIONS];

/// Parameter-shaped gradient buffers, in the owning network's `params` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(params: &[&[f64]]) -> Self {
        Self(params.iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn scale(&mut self, c: f64) {
        self.0.iter_mut().flatten().for_each(|g| *g *= c);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, g| m.max(g.abs()))
    }
}

pub trait QFunction {
    fn q_values(&self, x: &Features) -> QValues;
}

/// A Q-network whose parameters can be read, updated and differentiated.
pub trait Trainable: QFunction + Clone {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    /// Adds `dL/dθ` to `grads`, given `dL/dQ` at input `x`.
    fn accumulate_gradients(&self, x: &Features, grad_q: &QValues, grads: &mut Gradients);

    fn zero_gradients(&self) -> Gradients {
        Gradients::zeros_like(&self.params())
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

fn to_q(v: Vec<f64>) -> QValues {
    v.try_into().expect("network output width is NUM_ACTIONS")
}

/// Plain feedforward Q-network, 6 → hidden… → 3.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub mlp: Mlp,
}

impl QNetwork {
    pub fn new(hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut sizes = vec![STATE_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(NUM_ACTIONS);
        Self {
            mlp: Mlp::new(&sizes, activation, &mut seeded(seed)),
        }
    }

    /// 6 → 64 → 64 → 64 → 3 with ReLU.
    pub fn standard(seed: u64) -> Self {
        Self::new(&HIDDEN, Activation::Relu, seed)
    }

    pub fn forward(&self, x: &[f64]) -> Result<QValues> {
        self.mlp.check_input(x)?;
        Ok(to_q(self.mlp.forward(x)))
    }
}

impl QFunction for QNetwork {
    fn q_values(&self, x: &Features) -> QValues {
        to_q(self.mlp.forward(x))
    }
}

impl Trainable for QNetwork {
    fn params(&self) -> Vec<&[f64]> {
        self.mlp.params()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.mlp.params_mut()
    }

    fn accumulate_gradients(&self, x: &Features, grad_q: &QValues, grads: &mut Gradients) {
        let trace = self.mlp.forward_trace(x);
        self.mlp.backward(&trace, grad_q, &mut grads.0);
    }
}

/// Two-stream network: `Q(s,a) = V(s) + A(s,a) − mean_a A(s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingQNetwork {
    pub trunk: Mlp,
    pub value: Mlp,
    pub advantage: Mlp,
}

impl DuelingQNetwork {
    pub fn new(trunk_hidden: &[usize], head_hidden: &[usize], activation: Activation, seed: u64) -> Self {
        assert!(!trunk_hidden.is_empty(), "dueling trunk needs at least one layer");
        let mut rng = seeded(seed);
        let mut trunk_sizes = vec![STATE_DIM];
        trunk_sizes.extend_from_slice(trunk_hidden);
        let mut trunk = Mlp::new(&trunk_sizes, activation, &mut rng);
        // The trunk output feeds both heads, so it keeps the hidden activation.
        if let Some(last) = trunk.layers.last_mut() {
            last.activation = activation;
        }
        let width = *trunk_hidden.last().expect("non-empty");
        let head = |out: usize, rng: &mut crate::rng::Rng| {
            let mut sizes = vec![width];
            sizes.extend_from_slice(head_hidden);
            sizes.push(out);
            Mlp::new(&sizes, activation, rng)
        };
        let value = head(1, &mut rng);
        let advantage = head(NUM_ACTIONS, &mut rng);
        Self {
            trunk,
            value,
            advantage,
        }
    }

    /// Trunk 6 → 64 → 64, value head 64 → 64 → 1, advantage head 64 → 64 → 3.
    pub fn standard(seed: u64) -> Self {
        Self::new(&DUELING_TRUNK, &DUELING_HEAD, Activation::Relu, seed)
    }

    /// State value and raw advantages.
    pub fn streams(&self, x: &[f64]) -> (f64, QValues) {
        let h = self.trunk.forward(x);
        (self.value.forward(&h)[0], to_q(self.advantage.forward(&h)))
    }

    pub fn forward(&self, x: &[f64]) -> Result<QValues> {
        self.trunk.check_input(x)?;
        let (v, a) = self.streams(x);
        Ok(combine(v, &a))
    }
}

fn combine(v: f64, a: &QValues) -> QValues {
    let mean = a.iter().sum::<f64>() / NUM_ACTIONS as f64;
    a.map(|ai| v + (ai - mean))
}

impl QFunction for DuelingQNetwork {
    fn q_values(&self, x: &Features) -> QValues {
        let (v, a) = self.streams(x);
        combine(v, &a)
    }
}

impl Trainable for DuelingQNetwork {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.trunk.params();
        p.extend(self.value.params());
        p.extend(self.advantage.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.trunk.params_mut();
        p.extend(self.value.params_mut());
        p.extend(self.advantage.params_mut());
        p
    }

    fn accumulate_gradients(&self, x: &Features, grad_q: &QValues, grads: &mut Gradients) {
        let trunk_trace = self.trunk.forward_trace(x);
        let h = trunk_trace.last().expect("non-empty");
        let value_trace = self.value.forward_trace(h);
        let adv_trace = self.advantage.forward_trace(h);

        // Q_a = V + A_a − mean(A):  dL/dV = Σ g,  dL/dA_j = g_j − Σ g / n
        let total: f64 = grad_q.iter().sum();
        let grad_v = [total];
        let grad_a = grad_q.map(|g| g - total / NUM_ACTIONS as f64);

        let nt = self.trunk.layers.len() * 2;
        let nv = self.value.layers.len() * 2;
        let (gt, rest) = grads.0.split_at_mut(nt);
        let (gv, ga) = rest.split_at_mut(nv);
        let dh_v = self.value.backward(&value_trace, &grad_v, gv);
        let dh_a = self.advantage.backward(&adv_trace, &grad_a, ga);
        let dh: Vec<f64> = dh_v.iter().zip(&dh_a).map(|(a, b)| a + b).collect();
        self.trunk.backward(&trunk_trace, &dh, gt);
    }
}

/// Either network family, so trainers can hold one concrete type.
#[derive(Debug, Clone, PartialEq)]
pub enum QModel {
    Plain(QNetwork),
    Dueling(DuelingQNetwork),
}

impl QFunction for QModel {
    fn q_values(&self, x: &Features) -> QValues {
        match self {
            QModel::Plain(n) => n.q_values(x),
            QModel::Dueling(n) => n.q_values(x),
        }
    }
}

impl Trainable for QModel {
    fn params(&self) -> Vec<&[f64]> {
        match self {
            QModel::Plain(n) => n.params(),
            QModel::Dueling(n) => n.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            QModel::Plain(n) => n.params_mut(),
            QModel::Dueling(n) => n.params_mut(),
        }
    }

    fn accumulate_gradients(&self, x: &Features, grad_q: &QValues, grads: &mut Gradients) {
        match self {
            QModel::Plain(n) => n.accumulate_gradients(x, grad_q, grads),
            QModel::Dueling(n) => n.accumulate_gradients(x, grad_q, grads),
        }
    }
}
