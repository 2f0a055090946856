//! Replay, exploration, bootstrap targets and the training loop for the
//! DQN, double DQN and dueling double DQN agents.

pub mod policy;
pub mod replay;
pub mod tabular;
pub mod target;
pub mod trainer;

pub use policy::{argmax, greedy, select_action, EpsilonSchedule};
pub use replay::{ReplayBuffer, Transition};
pub use target::{dddqn_target, ddqn_target, dqn_target};
pub use trainer::{Agent, AgentCheckpoint, AgentConfig, AgentKind, EpochStats};
