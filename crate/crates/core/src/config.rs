//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! out = "out"
//!
//! [paths]
//! prices_dir = "prices"        # one <SYMBOL>.csv per ticker
//! tweets = "tweets.jsonl"
//! edges = "edges.csv"
//! relations = "relations.csv"
//!
//! [sentiment]
//! backend = "lexicon"          # lexicon | prescored | remote
//! positive = "lexicon/positive.txt"
//! negative = "lexicon/negative.txt"
//!
//! [[tickers]]
//! symbol = "GARAN"
//! entity = "Garanti Bank"
//! main_keywords = ["garan"]
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentKind};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::sentiment::RemoteConfig;
use crate::signal::EffectConfig;
use crate::social::DEFAULT_INFLUENCER_THRESHOLD;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub prices_dir: PathBuf,
    pub tweets: PathBuf,
    pub edges: PathBuf,
    pub relations: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Lexicon,
    Prescored,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentSection {
    pub backend: Backend,
    pub positive: Option<PathBuf>,
    pub negative: Option<PathBuf>,
    pub prescored: Option<PathBuf>,
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    3
}

fn default_in_flight() -> usize {
    8
}

impl SentimentSection {
    pub fn remote_config(&self) -> Result<RemoteConfig> {
        let endpoint = self
            .endpoint
            .clone()
            .ok_or_else(|| Error::config("sentiment.endpoint", "required for the remote backend"))?;
        Ok(RemoteConfig {
            timeout: Duration::from_millis(self.timeout_ms),
            retries: self.retries,
            max_in_flight: self.max_in_flight,
            ..RemoteConfig::new(endpoint)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitySection {
    /// Authors need strictly more in-community followers than this.
    pub influencer_threshold: u64,
    /// Keep only tweets written by influencers.
    pub influencers_only: bool,
}

impl Default for CommunitySection {
    fn default() -> Self {
        Self {
            influencer_threshold: DEFAULT_INFLUENCER_THRESHOLD,
            influencers_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Windows {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    /// Local offset used to assign tweets to trading days.
    pub utc_offset_hours: i32,
}

impl Default for Windows {
    fn default() -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self {
            train_start: d(2015, 1, 1),
            train_end: d(2019, 12, 31),
            test_start: d(2020, 1, 1),
            test_end: d(2020, 12, 31),
            utc_offset_hours: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ticker {
    pub symbol: String,
    /// Knowledge-graph entity name of the company.
    pub entity: String,
    #[serde(default)]
    pub main_keywords: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CaMode {
    #[default]
    Both,
    Only,
    Off,
}

impl CaMode {
    pub fn flags(self) -> &'static [bool] {
        match self {
            CaMode::Both => &[false, true],
            CaMode::Only => &[true],
            CaMode::Off => &[false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub agents: Vec<AgentKind>,
    pub community_aware: CaMode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            agents: AgentKind::ALL.to_vec(),
            community_aware: CaMode::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    pub long_only: bool,
    /// Random policies evaluated as a baseline in each report.
    pub random_policies: usize,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            long_only: false,
            random_policies: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub paths: Paths,
    pub sentiment: SentimentSection,
    #[serde(default)]
    pub community: CommunitySection,
    #[serde(default)]
    pub windows: Windows,
    pub tickers: Vec<Ticker>,
    #[serde(default)]
    pub signal: EffectConfig,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub backtest: BacktestSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn missing(key: &str, path: &Path) -> Error {
    Error::config(key, format!("{} does not exist", path.display()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .message()
                .split('`')
                .nth(1)
                .filter(|_| e.message().contains("field"))
                .unwrap_or("<file>")
                .to_string();
            Error::config(key, e.message().trim().to_string())
        })
    }

    /// Reads, parses and path-resolves a config file. Run [`validate`](Self::validate)
    /// once command-line overrides are applied.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        fix(&mut self.paths.prices_dir);
        fix(&mut self.paths.tweets);
        fix(&mut self.paths.edges);
        fix(&mut self.paths.relations);
        for p in [
            &mut self.sentiment.positive,
            &mut self.sentiment.negative,
            &mut self.sentiment.prescored,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn price_path(&self, symbol: &str) -> PathBuf {
        self.paths.prices_dir.join(format!("{symbol}.csv"))
    }

    /// Checks values and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        if self.tickers.is_empty() {
            return Err(Error::config("tickers", "at least one ticker is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, t) in self.tickers.iter().enumerate() {
            if t.symbol.trim().is_empty() || t.symbol.contains(['/', '\\', '.']) {
                return Err(Error::config(format!("tickers[{i}].symbol"), "must be a plain symbol"));
            }
            if !seen.insert(&t.symbol) {
                return Err(Error::config(
                    format!("tickers[{i}].symbol"),
                    format!("duplicate {}", t.symbol),
                ));
            }
            if t.entity.trim().is_empty() {
                return Err(Error::config(format!("tickers[{i}].entity"), "must not be empty"));
            }
            let p = self.price_path(&t.symbol);
            if !p.is_file() {
                return Err(missing("paths.prices_dir", &p));
            }
        }
        for (key, p) in [
            ("paths.tweets", &self.paths.tweets),
            ("paths.edges", &self.paths.edges),
            ("paths.relations", &self.paths.relations),
        ] {
            if !p.is_file() {
                return Err(missing(key, p));
            }
        }
        match self.sentiment.backend {
            Backend::Lexicon => {
                for (key, p) in [
                    ("sentiment.positive", &self.sentiment.positive),
                    ("sentiment.negative", &self.sentiment.negative),
                ] {
                    let p = p
                        .as_ref()
                        .ok_or_else(|| Error::config(key, "required for the lexicon backend"))?;
                    if !p.is_file() {
                        return Err(missing(key, p));
                    }
                }
            }
            Backend::Prescored => {
                let p = self
                    .sentiment
                    .prescored
                    .as_ref()
                    .ok_or_else(|| Error::config("sentiment.prescored", "required for the prescored backend"))?;
                if !p.is_file() {
                    return Err(missing("sentiment.prescored", p));
                }
            }
            Backend::Remote => {
                self.sentiment.remote_config()?;
            }
        }
        let w = &self.windows;
        if w.train_start > w.train_end {
            return Err(Error::config("windows.train_end", "precedes windows.train_start"));
        }
        if w.test_start > w.test_end {
            return Err(Error::config("windows.test_end", "precedes windows.test_start"));
        }
        if w.train_end >= w.test_start {
            return Err(Error::config("windows.test_start", "must come after windows.train_end"));
        }
        if !(-12..=14).contains(&w.utc_offset_hours) {
            return Err(Error::config("windows.utc_offset_hours", "must lie in -12..=14"));
        }
        if self.run.agents.is_empty() {
            return Err(Error::config("run.agents", "at least one agent kind is required"));
        }
        if self.backtest.random_policies == 0 {
            return Err(Error::config("backtest.random_policies", "must be positive"));
        }
        self.signal.validate()?;
        self.env.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::config(
                "seed",
                "required for train and backtest (set it in the file or pass --seed)",
            )
        })
    }

    /// Keeps only the listed tickers; unknown symbols are an error.
    pub fn select_tickers(&mut self, symbols: &[String]) -> Result<()> {
        if symbols.is_empty() {
            return Ok(());
        }
        for s in symbols {
            if !self.tickers.iter().any(|t| &t.symbol == s) {
                return Err(Error::config("--ticker", format!("{s} is not configured")));
            }
        }
        self.tickers.retain(|t| symbols.contains(&t.symbol));
        Ok(())
    }

    /// The fully resolved configuration as TOML.
    pub fn echo(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<echo>", e.to_string()))
    }
}
