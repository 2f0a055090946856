//! Dense Q-networks with exact backpropagation and Adam.

pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod optim;
pub mod qnet;

pub use layer::{Activation, DenseLayer, Mlp};
pub use optim::{mse_loss, AdamConfig, AdamState};
pub use qnet::{DuelingQNetwork, Gradients, QFunction, QModel, QNetwork, QValues, Trainable};
