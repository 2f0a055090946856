use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{Action, Environment, Features};
use crate::error::{Error, Result};
use crate::ingest::write_atomic;
use crate::nn::{checkpoint, mse_loss, AdamConfig, AdamState, DuelingQNetwork, QFunction, QModel, QNetwork, Trainable};
use crate::rng::{derive_seed, seeded, Rng};

use super::policy::{greedy, select_action, EpsilonSchedule};
use super::replay::{ReplayBuffer, Transition, DEFAULT_CAPACITY};
use super::target::{ddqn_target, dqn_target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "DQN")]
    Dqn,
    #[serde(rename = "DDQN")]
    Ddqn,
    #[serde(rename = "DDDQN")]
    Dddqn,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Dqn, AgentKind::Ddqn, AgentKind::Dddqn];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "DQN",
            AgentKind::Ddqn => "DDQN",
            AgentKind::Dddqn => "DDDQN",
        }
    }

    /// Report label, `CA-` prefixed for community-aware runs.
    pub fn label(self, community: bool) -> String {
        if community {
            format!("CA-{}", self.name())
        } else {
            self.name().to_string()
        }
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown agent kind `{s}` (expected DQN, DDQN or DDDQN)"))
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon anneals; defaults to `epochs × horizon`.
    pub epsilon_decay_steps: Option<u64>,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub epochs: usize,
    pub replay_capacity: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            kind: AgentKind::Dqn,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: None,
            batch_size: 32,
            target_sync_every: 100,
            epochs: 50,
            replay_capacity: DEFAULT_CAPACITY,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("agent.gamma", "must lie in [0, 1)"));
        }
        for (k, v) in [
            ("agent.epsilon_start", self.epsilon_start),
            ("agent.epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(k, "must lie in [0, 1]"));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("agent.batch_size", "must be positive"));
        }
        if self.target_sync_every == 0 {
            return Err(Error::config("agent.target_sync_every", "must be positive"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::config("agent.replay_capacity", "must be at least batch_size"));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::config("agent.adam.lr", "must be positive"));
        }
        Ok(())
    }

    /// Fresh online network for this kind, seeded from the config seed.
    pub fn initial_network(&self) -> QModel {
        let seed = derive_seed(self.seed, "init");
        match self.kind {
            AgentKind::Dqn | AgentKind::Ddqn => QModel::Plain(QNetwork::standard(seed)),
            AgentKind::Dddqn => QModel::Dueling(DuelingQNetwork::standard(seed)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub total_reward: f64,
    /// `None` when no gradient step happened during the epoch.
    pub mean_loss: Option<f64>,
    pub steps: usize,
}

/// Online/target networks, optimizer, replay and exploration state.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    online: QModel,
    target: QModel,
    optimizer: AdamState,
    buffer: ReplayBuffer,
    rng: Rng,
    env_steps: u64,
    grad_steps: u64,
    epsilon: f64,
}

impl Agent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        let online = config.initial_network();
        Self::with_network(config, online)
    }

    pub fn with_network(config: AgentConfig, online: QModel) -> Result<Self> {
        config.validate()?;
        let dueling = matches!(online, QModel::Dueling(_));
        if dueling != (config.kind == AgentKind::Dddqn) {
            return Err(Error::InvalidInput(format!(
                "{} needs a {} network",
                config.kind,
                if config.kind == AgentKind::Dddqn {
                    "dueling"
                } else {
                    "plain"
                }
            )));
        }
        Ok(Self {
            target: online.clone(),
            online,
            optimizer: AdamState::new(config.adam),
            buffer: ReplayBuffer::new(config.replay_capacity),
            rng: seeded(derive_seed(config.seed, "explore")),
            env_steps: 0,
            grad_steps: 0,
            epsilon: config.epsilon_start,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &QModel {
        &self.online
    }

    pub fn target(&self) -> &QModel {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn greedy_action(&self, x: &Features) -> Action {
        greedy(&self.online.q_values(x))
    }

    fn bootstrap(&self, tr: &Transition) -> f64 {
        match self.config.kind {
            AgentKind::Dqn => dqn_target(tr, &self.target, self.config.gamma),
            AgentKind::Ddqn | AgentKind::Dddqn => ddqn_target(tr, &self.online, &self.target, self.config.gamma),
        }
    }

    /// One minibatch update; returns the mean squared error before the step.
    fn learn(&mut self) -> Result<f64> {
        let b = self.config.batch_size;
        let batch: Vec<Transition> = self.buffer.sample(b, &mut self.rng)?.into_iter().copied().collect();
        let mut grads = self.online.zero_gradients();
        let mut loss = 0.0;
        for tr in &batch {
            let y = self.bootstrap(tr);
            let q = self.online.q_values(&tr.state);
            let (l, mut g) = mse_loss(&q, tr.action.index(), y);
            loss += l;
            g.iter_mut().for_each(|gi| *gi /= b as f64);
            self.online.accumulate_gradients(&tr.state, &g, &mut grads);
        }
        self.optimizer.step(self.online.params_mut(), &grads)?;
        self.grad_steps += 1;
        if self.grad_steps % self.config.target_sync_every == 0 {
            self.target = self.online.clone();
        }
        Ok(loss / b as f64)
    }

    /// Runs `epochs` full episodes, learning after every environment step
    /// once the buffer holds a batch.
    pub fn train<E: Environment>(&mut self, env: &mut E) -> Result<Vec<EpochStats>> {
        let schedule = EpsilonSchedule {
            start: self.config.epsilon_start,
            end: self.config.epsilon_end,
            decay_steps: self
                .config
                .epsilon_decay_steps
                .unwrap_or((self.config.epochs * env.horizon()) as u64),
        };
        let mut curves = Vec::with_capacity(self.config.epochs);
        for epoch in 1..=self.config.epochs {
            let mut state = env.reset()?;
            let mut total_reward = 0.0;
            let mut loss_sum = 0.0;
            let mut updates = 0usize;
            let mut steps = 0usize;
            loop {
                self.epsilon = schedule.at(self.env_steps);
                let q = self.online.q_values(&state);
                let action = select_action(&q, self.epsilon, &mut self.rng);
                let out = env.step(action)?;
                if !out.reward.is_finite() || out.next_state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "environment produced a non-finite transition in epoch {epoch}"
                    )));
                }
                self.buffer.push(Transition {
                    state,
                    action,
                    reward: out.reward,
                    next_state: out.next_state,
                    done: out.done,
                });
                total_reward += out.reward;
                self.env_steps += 1;
                steps += 1;
                if self.buffer.len() >= self.config.batch_size {
                    loss_sum += self.learn()?;
                    updates += 1;
                }
                state = out.next_state;
                if out.done {
                    break;
                }
            }
            curves.push(EpochStats {
                epoch,
                total_reward,
                mean_loss: (updates > 0).then(|| loss_sum / updates as f64),
                steps,
            });
        }
        self.epsilon = schedule.at(self.env_steps);
        Ok(curves)
    }
}

/// A trained agent as persisted on disk: network, config echo and the
/// exploration rate it finished with.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub config: AgentConfig,
    pub community: bool,
    pub final_epsilon: f64,
    pub model: QModel,
}

const AGENT_MAGIC: &str = "kgtrader-agent 1";

impl AgentCheckpoint {
    pub fn from_agent(agent: &Agent, community: bool) -> Self {
        Self {
            config: agent.config.clone(),
            community,
            final_epsilon: agent.epsilon,
            model: agent.online.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        format!(
            "{AGENT_MAGIC}\ncommunity {}\nfinal_epsilon {}\nconfig {config}\n{}",
            self.community,
            self.final_epsilon,
            checkpoint::to_text(&self.model)
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut parts = text.splitn(5, '\n');
        let mut field = |key: &str| -> Result<String> {
            let line = parts.next().unwrap_or("");
            let rest = if key.is_empty() {
                Some(line)
            } else {
                line.strip_prefix(key).and_then(|r| r.strip_prefix(' '))
            };
            rest.map(str::to_string)
                .ok_or_else(|| Error::Checkpoint(format!("expected `{key}` line")))
        };
        if field("")? != AGENT_MAGIC {
            return Err(Error::Checkpoint("not an agent checkpoint".into()));
        }
        let community = field("community")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad community flag".into()))?;
        let final_epsilon = field("final_epsilon")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad final_epsilon".into()))?;
        let config: AgentConfig =
            serde_json::from_str(&field("config")?).map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
        let model = checkpoint::from_text(&field("")?)?;
        Ok(Self {
            config,
            community,
            final_epsilon,
            model,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
