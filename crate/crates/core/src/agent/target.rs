//! Bootstrap targets for the three agent variants.

use crate::nn::{DuelingQNetwork, QFunction};

use super::policy::argmax;
use super::replay::Transition;

/// `r + γ · max_a Q_target(s', a)`, or `r` on terminal transitions.
pub fn dqn_target<Q: QFunction + ?Sized>(tr: &Transition, target: &Q, gamma: f64) -> f64 {
    if tr.done {
        return tr.reward;
    }
    let q = target.q_values(&tr.next_state);
    tr.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `r + γ · Q_target(s', argmax_a Q_online(s', a))`: the online network picks
/// the action, the target network values it.
pub fn ddqn_target<Q: QFunction + ?Sized>(tr: &Transition, online: &Q, target: &Q, gamma: f64) -> f64 {
    if tr.done {
        return tr.reward;
    }
    let best = argmax(&online.q_values(&tr.next_state));
    tr.reward + gamma * target.q_values(&tr.next_state)[best]
}

/// Double-Q target evaluated on dueling networks.
pub fn dddqn_target(tr: &Transition, online: &DuelingQNetwork, target: &DuelingQNetwork, gamma: f64) -> f64 {
    ddqn_target(tr, online, target, gamma)
}
