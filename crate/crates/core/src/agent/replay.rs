use std::collections::VecDeque;

use rand::Rng;

use crate::env::{Action, Features};
use crate::error::{Error, Result};

/// Capacity used unless configured otherwise.
pub const DEFAULT_CAPACITY: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: Features,
    pub action: Action,
    pub reward: f64,
    pub next_state: Features,
    pub done: bool,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends a transition, evicting the oldest one when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Positions of a uniform sample of `k` distinct entries (0 = oldest).
    pub fn sample_indices(&self, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if k > self.items.len() {
            return Err(Error::Underfilled {
                len: self.items.len(),
                requested: k,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), k).into_vec())
    }

    /// Uniform sample of `k` transitions without replacement.
    pub fn sample(&self, k: usize, rng: &mut impl Rng) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(k, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
