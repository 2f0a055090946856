use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, NUM_ACTIONS};
use crate::nn::QValues;

/// Index of the largest Q-value; ties go to the lowest index.
pub fn argmax(q: &QValues) -> usize {
    let mut best = 0;
    for i in 1..NUM_ACTIONS {
        if q[i] > q[best] {
            best = i;
        }
    }
    best
}

pub fn greedy(q: &QValues) -> Action {
    Action::from_index(argmax(q)).expect("index in range")
}

/// With probability `epsilon` a uniformly random action, otherwise greedy.
pub fn select_action(q: &QValues, epsilon: f64, rng: &mut impl Rng) -> Action {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Action::from_index(rng.gen_range(0..NUM_ACTIONS)).expect("index in range")
    } else {
        greedy(q)
    }
}

/// Linear annealing from `start` to `end` over `decay_steps` environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn at(&self, step: u64) -> f64 {
        if self.decay_steps == 0 {
            return self.end;
        }
        let frac = (step as f64 / self.decay_steps as f64).min(1.0);
        self.start * (1.0 - frac) + self.end * frac
    }
}
