//! Central finite-difference verification of backpropagated gradients.

use crate::env::Features;

use super::optim::mse_loss;
use super::qnet::{Gradients, Trainable};

/// Magnitude below which differences are measured absolutely rather than
/// relative to the gradient size.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

pub fn sample_loss<N: Trainable>(net: &N, x: &Features, action: usize, target: f64) -> f64 {
    mse_loss(&net.q_values(x), action, target).0
}

/// Backpropagated gradient of the single-sample squared error.
pub fn analytic_gradients<N: Trainable>(net: &N, x: &Features, action: usize, target: f64) -> Gradients {
    let (_, grad_q) = mse_loss(&net.q_values(x), action, target);
    let mut grads = net.zero_gradients();
    net.accumulate_gradients(x, &grad_q, &mut grads);
    grads
}

/// Largest relative error between `analytic` and central differences with step `h`.
pub fn gradient_check_against<N: Trainable>(
    net: &N,
    x: &Features,
    action: usize,
    target: f64,
    h: f64,
    analytic: &Gradients,
) -> f64 {
    let mut probe = net.clone();
    let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut worst: f64 = 0.0;
    for (k, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let orig = probe.params()[k][i];
            probe.params_mut()[k][i] = orig + h;
            let up = sample_loss(&probe, x, action, target);
            probe.params_mut()[k][i] = orig - h;
            let down = sample_loss(&probe, x, action, target);
            probe.params_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic.0[k][i], numeric));
        }
    }
    worst
}

pub fn gradient_check<N: Trainable>(net: &N, x: &Features, action: usize, target: f64, h: f64) -> f64 {
    let analytic = analytic_gradients(net, x, action, target);
    gradient_check_against(net, x, action, target, h, &analytic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Activation;
    use crate::nn::qnet::{DuelingQNetwork, QNetwork};

    #[test]
    fn linear_network_is_exact() {
        let net = QNetwork::new(&[8, 8], Activation::Identity, 11);
        let x = [0.3, -0.7, 1.1, 0.05, -0.4, 0.9];
        let err = gradient_check(&net, &x, 1, 0.25, 1e-3);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn relu_networks_pass() {
        let x = [0.8, -0.2, 0.4, -1.3, 0.6, 0.1];
        let plain = QNetwork::standard(4);
        assert!(gradient_check(&plain, &x, 0, 1.0, 1e-5) < 1e-4);
        let dueling = DuelingQNetwork::standard(4);
        assert!(gradient_check(&dueling, &x, 2, -0.5, 1e-5) < 1e-4);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let net = QNetwork::new(&[8], Activation::Relu, 2);
        let x = [0.5; 6];
        let mut g = analytic_gradients(&net, &x, 0, 3.0);
        let last = g.0.len() - 1;
        g.0[last][0] += 1.0;
        assert!(gradient_check_against(&net, &x, 0, 3.0, 1e-5, &g) > 1e-2);
    }
}
