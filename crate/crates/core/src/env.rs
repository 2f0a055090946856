//! The daily trading MDP.
//!
//! A state has six features, in this order (the network input layout):
//!
//! 0. normalized close of day `t`
//! 1. sentiment of day `t`
//! 2. 5-day growth bias
//! 3. mean sentiment of the previous 5 days
//! 4. 30-day growth bias
//! 5. mean sentiment of the previous 30 days
//!
//! Growth bias is `(close_t − m) / m` where `m` is the mean close over the
//! trailing window (excluding day `t`).

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{MarketBar, PriceScaler};
use crate::signal::DailySignal;

pub const STATE_DIM: usize = 6;
pub const NUM_ACTIONS: usize = 3;
pub const SHORT_WINDOW: usize = 5;
pub const LONG_WINDOW: usize = 30;

pub type Features = [f64; STATE_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Buy,
    Sell,
    Hold,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Buy, Action::Sell, Action::Hold];

    /// Network output index.
    pub fn index(self) -> usize {
        match self {
            Action::Buy => 0,
            Action::Sell => 1,
            Action::Hold => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn direction(self) -> f64 {
        match self {
            Action::Buy => 1.0,
            Action::Sell => -1.0,
            Action::Hold => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::Buy => "buy",
            Action::Sell => "sell",
            Action::Hold => "hold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub close_norm: f64,
    pub sent_today: f64,
    pub growth5: f64,
    pub sent5: f64,
    pub growth30: f64,
    pub sent30: f64,
}

impl EnvState {
    pub fn features(&self) -> Features {
        [
            self.close_norm,
            self.sent_today,
            self.growth5,
            self.sent5,
            self.growth30,
            self.sent30,
        ]
    }
}

/// Blend weights for the reward. The defaults weigh the current day twice
/// the 5-day term and four times the 30-day term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub w_daily: f64,
    pub w_5: f64,
    pub w_30: f64,
    /// Weight of the realized next-day move in normalized points.
    pub alpha_price: f64,
    pub warmup_days: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            w_daily: 4.0,
            w_5: 2.0,
            w_30: 1.0,
            alpha_price: 1.0,
            warmup_days: LONG_WINDOW,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("env.w_daily", self.w_daily),
            ("env.w_5", self.w_5),
            ("env.w_30", self.w_30),
            ("env.alpha_price", self.alpha_price),
        ] {
            if !v.is_finite() {
                return Err(Error::config(k, "must be finite"));
            }
        }
        if self.warmup_days < LONG_WINDOW {
            return Err(Error::config(
                "env.warmup_days",
                format!("must be at least {LONG_WINDOW} so every state is computable"),
            ));
        }
        Ok(())
    }
}

fn trailing_mean(values: &[f64], t: usize, window: usize) -> Result<f64> {
    if t < window || t >= values.len() {
        return Err(Error::InsufficientHistory { t, needed: window });
    }
    Ok(values[t - window..t].iter().sum::<f64>() / window as f64)
}

/// Relative deviation of `closes[t]` from the mean of the `window` closes before it.
pub fn growth_bias(closes: &[f64], t: usize, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidInput("growth window must be positive".into()));
    }
    let mean = trailing_mean(closes, t, window)?;
    if mean == 0.0 {
        return Err(Error::InvalidInput(format!("zero mean close before day {t}")));
    }
    Ok((closes[t] - mean) / mean)
}

/// Growth bias scaled by that day's normalized close.
pub fn growth_signal(g: f64, close_norm: f64) -> f64 {
    g * close_norm
}

/// Aligned daily series for one ticker over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketWindow {
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
    pub close_norm: Vec<f64>,
    pub sentiment: Vec<f64>,
}

impl MarketWindow {
    /// Aligns bars with the ticker's signal rows; days without a row get 0.
    pub fn new(bars: &[MarketBar], scaler: &PriceScaler, signals: &[DailySignal]) -> Self {
        let by_date: HashMap<NaiveDate, f64> = signals.iter().map(|s| (s.date, s.sentiment_value)).collect();
        Self {
            dates: bars.iter().map(|b| b.date).collect(),
            closes: bars.iter().map(|b| b.close).collect(),
            close_norm: bars.iter().map(|b| scaler.apply(b.close)).collect(),
            sentiment: bars
                .iter()
                .map(|b| by_date.get(&b.date).copied().unwrap_or(0.0))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Same window with every sentiment value zeroed (the non-community baseline).
    pub fn without_sentiment(&self) -> Self {
        Self {
            sentiment: vec![0.0; self.sentiment.len()],
            ..self.clone()
        }
    }
}

/// Builds the state of day `t`; needs 30 prior days.
pub fn make_state(t: usize, w: &MarketWindow) -> Result<EnvState> {
    if t < LONG_WINDOW || t >= w.len() {
        return Err(Error::InsufficientHistory { t, needed: LONG_WINDOW });
    }
    Ok(EnvState {
        close_norm: w.close_norm[t],
        sent_today: w.sentiment[t],
        growth5: growth_bias(&w.closes, t, SHORT_WINDOW)?,
        sent5: trailing_mean(&w.sentiment, t, SHORT_WINDOW)?,
        growth30: growth_bias(&w.closes, t, LONG_WINDOW)?,
        sent30: trailing_mean(&w.sentiment, t, LONG_WINDOW)?,
    })
}

/// Sentiment and growth blend of day `t`, before applying the action direction.
pub fn reward_blend(t: usize, cfg: &EnvConfig, w: &MarketWindow) -> Result<f64> {
    let s = make_state(t, w)?;
    let cn = w.close_norm[t];
    let g1 = growth_bias(&w.closes, t, 1)?;
    Ok(cfg.w_daily * (s.sent_today + growth_signal(g1, cn))
        + cfg.w_5 * (s.sent5 + growth_signal(s.growth5, cn))
        + cfg.w_30 * (s.sent30 + growth_signal(s.growth30, cn)))
}

/// Reward for taking `action` on day `t`; Hold is exactly zero.
pub fn reward(t: usize, action: Action, cfg: &EnvConfig, w: &MarketWindow) -> Result<f64> {
    if t + 1 >= w.len() {
        return Err(Error::InvalidInput(format!(
            "day {t} has no following day in a window of {}",
            w.len()
        )));
    }
    let blend = reward_blend(t, cfg, w)?;
    if action == Action::Hold {
        return Ok(0.0);
    }
    let realized = w.close_norm[t + 1] - w.close_norm[t];
    Ok(action.direction() * (cfg.alpha_price * realized + blend))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: Features,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment over 6-feature states.
pub trait Environment {
    fn reset(&mut self) -> Result<Features>;
    fn step(&mut self, action: Action) -> Result<StepResult>;
    /// Upper bound on steps per episode.
    fn horizon(&self) -> usize;
}

/// Steps through a market window one trading day at a time, starting after
/// the warmup days.
#[derive(Debug, Clone)]
pub struct MarketEnv {
    window: MarketWindow,
    config: EnvConfig,
    t: usize,
    done: bool,
}

impl MarketEnv {
    pub fn new(window: MarketWindow, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        if window.len() < config.warmup_days + 2 {
            return Err(Error::InvalidInput(format!(
                "window of {} days is too short: need warmup {} + 2",
                window.len(),
                config.warmup_days
            )));
        }
        Ok(Self {
            t: config.warmup_days,
            done: true,
            window,
            config,
        })
    }

    pub fn window(&self) -> &MarketWindow {
        &self.window
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Current day index.
    pub fn day(&self) -> usize {
        self.t
    }

    pub fn state(&self) -> Result<EnvState> {
        make_state(self.t, &self.window)
    }
}

impl Environment for MarketEnv {
    fn reset(&mut self) -> Result<Features> {
        self.t = self.config.warmup_days;
        self.done = false;
        Ok(self.state()?.features())
    }

    fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let r = reward(self.t, action, &self.config, &self.window)?;
        self.t += 1;
        self.done = self.t + 1 == self.window.len();
        Ok(StepResult {
            next_state: self.state()?.features(),
            reward: r,
            done: self.done,
        })
    }

    fn horizon(&self) -> usize {
        self.window.len() - self.config.warmup_days - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(closes: Vec<f64>, sentiment: Vec<f64>) -> MarketWindow {
        let scaler = PriceScaler::fit(&closes).unwrap();
        let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        MarketWindow {
            dates: (0..closes.len()).map(|i| base + chrono::Days::new(i as u64)).collect(),
            close_norm: closes.iter().map(|&c| scaler.apply(c)).collect(),
            closes,
            sentiment,
        }
    }

    #[test]
    fn growth_examples() {
        let closes = [10.0, 10.0, 10.0, 10.0, 10.0, 11.0];
        assert!((growth_bias(&closes, 5, 5).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(growth_bias(&[3.0; 6], 5, 5).unwrap(), 0.0);
        let closes = [20.0, 20.0, 20.0, 20.0, 20.0, 15.0];
        assert_eq!(growth_bias(&closes, 5, 5).unwrap(), -0.25);
        assert!(matches!(
            growth_bias(&closes, 4, 5),
            Err(Error::InsufficientHistory { .. })
        ));
        assert!(growth_bias(&[0.0, 0.0, 1.0], 2, 2).is_err());
    }

    #[test]
    fn growth_signal_examples() {
        assert_eq!(growth_signal(0.1, 50.0), 5.0);
        assert_eq!(growth_signal(0.0, 77.0), 0.0);
        assert!((growth_signal(-0.2, 10.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_sentiment_and_flat_prices() {
        let w = window(vec![5.0; 40], vec![0.0; 40]);
        let s = make_state(30, &w).unwrap();
        assert_eq!(s.features(), [50.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for a in Action::ALL {
            assert_eq!(reward(30, a, &EnvConfig::default(), &w).unwrap(), 0.0);
        }
        assert!(make_state(29, &w).is_err());
    }

    #[test]
    fn state_matches_hand_computation() {
        // closes 1..=31, sentiment i/10 for day i
        let closes: Vec<f64> = (1..=31).map(f64::from).collect();
        let sentiment: Vec<f64> = (0..31).map(|i| i as f64 / 10.0).collect();
        let w = window(closes, sentiment);
        let s = make_state(30, &w).unwrap();
        // close 31 is the max → 100
        assert_eq!(s.close_norm, 100.0);
        assert_eq!(s.sent_today, 3.0);
        // prior five closes 26..=30 → mean 28; (31 − 28)/28
        assert!((s.growth5 - 3.0 / 28.0).abs() < 1e-15);
        // prior five sentiments 2.5..=2.9 → mean 2.7
        assert!((s.sent5 - 2.7).abs() < 1e-12);
        // prior thirty closes 1..=30 → mean 15.5
        assert!((s.growth30 - (31.0 - 15.5) / 15.5).abs() < 1e-15);
        // prior thirty sentiments 0.0..=2.9 → mean 1.45
        assert!((s.sent30 - 1.45).abs() < 1e-12);
    }

    #[test]
    fn buy_sell_realized_move() {
        // Flat history, then a jump on the last day; no sentiment.
        let mut closes = vec![10.0; 32];
        closes[31] = 13.0;
        let w = window(closes, vec![0.0; 32]);
        let cfg = EnvConfig::default();
        // 10 → 0 and 13 → 100 in normalized points; blend on day 30 is 0.
        assert_eq!(reward(30, Action::Buy, &cfg, &w).unwrap(), 100.0);
        assert_eq!(reward(30, Action::Sell, &cfg, &w).unwrap(), -100.0);
        assert_eq!(reward(30, Action::Hold, &cfg, &w).unwrap(), 0.0);
        assert!(reward(31, Action::Buy, &cfg, &w).is_err());
    }

    #[test]
    fn episode_length_and_done() {
        let n = 40;
        let w = window((0..n).map(|i| 10.0 + (i % 3) as f64).collect(), vec![0.5; n]);
        let mut env = MarketEnv::new(w, EnvConfig::default()).unwrap();
        assert!(matches!(env.step(Action::Hold), Err(Error::EpisodeDone)));
        env.reset().unwrap();
        let tradable = n - 30;
        let mut steps = 0;
        loop {
            let r = env.step(Action::Buy).unwrap();
            steps += 1;
            if r.done {
                break;
            }
        }
        assert_eq!(steps, tradable - 1);
        assert_eq!(env.horizon(), steps);
        assert!(matches!(env.step(Action::Buy), Err(Error::EpisodeDone)));
    }

    #[test]
    fn toy_window_replay() {
        let mut closes = vec![10.0; 30];
        closes.extend([10.0, 12.0, 11.0]);
        let mut sentiment = vec![0.0; 30];
        sentiment.extend([1.0, -1.0, 0.0]);
        let w = window(closes, sentiment);
        let cfg = EnvConfig {
            alpha_price: 1.0,
            ..EnvConfig::default()
        };
        let mut env = MarketEnv::new(w.clone(), cfg).unwrap();
        env.reset().unwrap();

        // Day 30: close 10 (norm 0), sentiment 1, all growth 0, prior
        // sentiment 0. blend = 4·1; move 0 → 100.
        let r = env.step(Action::Buy).unwrap();
        assert_eq!(r.reward, 100.0 + 4.0);
        assert!(!r.done);

        // Day 31: close 12 (norm 100), g1 = 0.2, g5 = 0.2, g30 = 2/10.
        // sentiment −1, sent5 = 1/5, sent30 = 1/30. Move 100 → 50.
        let g = 0.2 * 100.0;
        let blend = 4.0 * (-1.0 + g) + 2.0 * (0.2 + g) + (1.0 / 30.0 + g);
        let r = env.step(Action::Sell).unwrap();
        assert!((r.reward - -(-50.0 + blend)).abs() < 1e-12);
        assert!(r.done);
    }

    proptest! {
        #[test]
        fn buy_sell_antisymmetric(
            closes in prop::collection::vec(1.0f64..100.0, 35..80),
            seed_sent in prop::collection::vec(-3.0f64..3.0, 80),
        ) {
            let n = closes.len();
            let w = window(closes, seed_sent[..n].to_vec());
            let cfg = EnvConfig::default();
            for t in 30..n - 1 {
                let b = reward(t, Action::Buy, &cfg, &w).unwrap();
                let s = reward(t, Action::Sell, &cfg, &w).unwrap();
                prop_assert_eq!(b, -s);
                prop_assert_eq!(reward(t, Action::Hold, &cfg, &w).unwrap(), 0.0);
            }
        }

        #[test]
        fn growth_scale_invariant(closes in prop::collection::vec(1.0f64..100.0, 31..60), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = closes.iter().map(|x| x * c).collect();
            for t in 30..closes.len() {
                for win in [1, 5, 30] {
                    let a = growth_bias(&closes, t, win).unwrap();
                    let b = growth_bias(&scaled, t, win).unwrap();
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                }
            }
        }

        #[test]
        fn make_state_is_pure(closes in prop::collection::vec(1.0f64..100.0, 31..40)) {
            let n = closes.len();
            let w = window(closes, vec![0.25; n]);
            prop_assert_eq!(make_state(n - 1, &w).unwrap(), make_state(n - 1, &w).unwrap());
        }
    }
}
