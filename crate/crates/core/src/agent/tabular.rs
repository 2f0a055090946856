//! Small deterministic MDPs with one-hot states, used to check that the
//! learners recover known optimal policies.

use rand::Rng as _;

use crate::env::{Action, Environment, Features, StepResult, NUM_ACTIONS, STATE_DIM};
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// Where an action leads from a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// Move to state `next` with `reward`.
    Move { next: usize, reward: f64 },
    /// End the episode with `reward`.
    Terminal { reward: f64 },
}

/// Deterministic episodic MDP. Each episode starts in a uniformly random
/// state drawn from a seeded generator.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    table: Vec<[Outcome; NUM_ACTIONS]>,
    horizon: usize,
    rng: Rng,
    state: usize,
    done: bool,
}

impl TabularMdp {
    pub fn new(table: Vec<[Outcome; NUM_ACTIONS]>, horizon: usize, seed: u64) -> Result<Self> {
        if table.is_empty() || table.len() > STATE_DIM {
            return Err(Error::InvalidInput(format!("tabular MDP needs 1..={STATE_DIM} states")));
        }
        for row in &table {
            for o in row {
                if let Outcome::Move { next, .. } = o {
                    if *next >= table.len() {
                        return Err(Error::InvalidInput(format!("transition to unknown state {next}")));
                    }
                }
            }
        }
        Ok(Self {
            table,
            horizon,
            rng: seeded(seed),
            state: 0,
            done: true,
        })
    }

    /// Four states in a forward chain, optimal actions differ per state.
    pub fn chain_example(seed: u64) -> Self {
        use Outcome::{Move, Terminal};
        let table = vec![
            [
                Move { next: 1, reward: 0.0 },
                Move { next: 2, reward: 0.0 },
                Terminal { reward: 1.0 },
            ],
            [
                Move { next: 3, reward: 0.0 },
                Move { next: 2, reward: 1.0 },
                Terminal { reward: 0.5 },
            ],
            [
                Move { next: 3, reward: 0.0 },
                Terminal { reward: 2.0 },
                Terminal { reward: 0.0 },
            ],
            [
                Terminal { reward: 0.0 },
                Terminal { reward: 1.0 },
                Terminal { reward: 4.0 },
            ],
        ];
        Self::new(table, 4, seed).expect("valid table")
    }

    pub fn table(&self) -> &[[Outcome; NUM_ACTIONS]] {
        &self.table
    }

    pub fn num_states(&self) -> usize {
        self.table.len()
    }

    pub fn encode(state: usize) -> Features {
        let mut f = [0.0; STATE_DIM];
        f[state] = 1.0;
        f
    }
}

impl Environment for TabularMdp {
    fn reset(&mut self) -> Result<Features> {
        self.state = self.rng.gen_range(0..self.table.len());
        self.done = false;
        Ok(Self::encode(self.state))
    }

    fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        match self.table[self.state][action.index()] {
            Outcome::Move { next, reward } => {
                self.state = next;
                Ok(StepResult {
                    next_state: Self::encode(next),
                    reward,
                    done: false,
                })
            }
            Outcome::Terminal { reward } => {
                self.done = true;
                Ok(StepResult {
                    next_state: Self::encode(self.state),
                    reward,
                    done: true,
                })
            }
        }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}
