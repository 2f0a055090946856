//! Community-aware sentiment signals and deep Q-learning trading agents.
//!
//! The pipeline runs in stages:
//!
//! - [`ingest`] parses prices, tweets, follower edges and relation snapshots.
//! - [`social`] scores authors by their in-community follower count.
//! - [`knowledge`] expands a company entity into main and related keywords.
//! - [`sentiment`] assigns a polarity to each tweet through a pluggable backend.
//! - [`signal`] turns matched, scored tweets into one value per trading day.
//! - [`env`] is the daily trading MDP built from prices and signals.
//! - [`nn`] holds the dense Q-networks, backpropagation and Adam.
//! - [`agent`] implements replay, exploration and the DQN/DDQN/DDDQN trainer.
//! - [`backtest`] evaluates trained agents and formats comparisons.
//! - [`pipeline`] wires the stages together behind a config file.

pub mod agent;
pub mod backtest;
pub mod config;
pub mod env;
pub mod error;
pub mod fixture;
pub mod fold;
pub mod ingest;
pub mod knowledge;
pub mod nn;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod sentiment;
pub mod signal;
pub mod social;

pub use error::{Error, Result};
