//! Per-tweet effect scores and their daily aggregation.
//!
//! Each matched tweet gets an effect score from its interaction counts and
//! the author's influencer score:
//!
//! ```text
//! RB = rc_oe + RC              (retweet bias)
//! IB = RB + LC + RepC          (interaction bias)
//! ES = IB + IS                 (main-keyword tweets)
//! ES = (IB + IS) / RP          (related-keyword tweets)
//! ```
//!
//! The score is signed by polarity, the day's vector of signed scores is
//! divided by its Euclidean norm, and the normalized entries are summed into
//! one value per ticker and trading day.

use std::collections::BTreeMap;

use chrono::{FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TweetRecord;
use crate::knowledge::{match_tweet, KeywordDictionary, MatchKind};
use crate::sentiment::{Polarity, SentimentProvider};

#[derive(Debug, Clone, PartialEq)]
pub struct DailySignal {
    pub ticker: String,
    pub date: NaiveDate,
    pub sentiment_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RetweetBiasMode {
    /// `RB = rc_oe + RC`
    #[default]
    Additive,
    /// `RB = rc_oe × RC`
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectConfig {
    pub rc_oe: f64,
    pub rp: f64,
    pub retweet_bias_mode: RetweetBiasMode,
}

impl Default for EffectConfig {
    fn default() -> Self {
        Self {
            rc_oe: 2.0,
            rp: 4.0,
            retweet_bias_mode: RetweetBiasMode::Additive,
        }
    }
}

impl EffectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rp.is_finite() && self.rp > 0.0) {
            return Err(Error::config("signal.rp", "must be a positive number"));
        }
        if !(self.rc_oe.is_finite() && self.rc_oe >= 0.0) {
            return Err(Error::config("signal.rc_oe", "must be non-negative"));
        }
        Ok(())
    }
}

/// Everything the effect score of one tweet depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectInputs {
    pub retweets: u64,
    pub likes: u64,
    pub replies: u64,
    pub influencer_score: f64,
    pub match_kind: MatchKind,
}

pub fn retweet_bias(rc_oe: f64, rc: u64) -> f64 {
    rc_oe + rc as f64
}

pub fn retweet_bias_with(mode: RetweetBiasMode, rc_oe: f64, rc: u64) -> f64 {
    match mode {
        RetweetBiasMode::Additive => retweet_bias(rc_oe, rc),
        RetweetBiasMode::Multiplicative => rc_oe * rc as f64,
    }
}

pub fn interaction_bias(rb: f64, lc: u64, rep_c: u64) -> f64 {
    rb + lc as f64 + rep_c as f64
}

/// Main-keyword tweets score `ib + is`; related-only tweets are divided by `rp`.
pub fn effect_score(ib: f64, is: f64, match_kind: MatchKind, rp: f64) -> Result<f64> {
    match match_kind {
        MatchKind::Main => Ok(ib + is),
        MatchKind::Related => Ok((ib + is) / rp),
        MatchKind::None => Err(Error::InvalidInput(
            "effect score requested for a tweet that matched no keyword".into(),
        )),
    }
}

impl EffectInputs {
    pub fn score(&self, cfg: &EffectConfig) -> Result<f64> {
        let rb = retweet_bias_with(cfg.retweet_bias_mode, cfg.rc_oe, self.retweets);
        let ib = interaction_bias(rb, self.likes, self.replies);
        effect_score(ib, self.influencer_score, self.match_kind, cfg.rp)
    }
}

pub fn signed_score(es: f64, polarity: Polarity) -> f64 {
    es * polarity.numeric_value()
}

/// Divides a day's scores by their Euclidean norm; an all-zero day is
/// returned unchanged.
pub fn normalize_day(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty day".into()));
    }
    let norm = scores.iter().map(|s| s * s).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(scores.to_vec());
    }
    Ok(scores.iter().map(|s| s / norm).collect())
}

/// Sum of the day's normalized signed scores; zero for a day without tweets.
pub fn daily_sentiment(signed_scores: &[f64]) -> f64 {
    match normalize_day(signed_scores) {
        Ok(v) => v.iter().sum(),
        Err(_) => 0.0,
    }
}

/// Trading calendar used to bucket tweets onto exchange days.
#[derive(Debug, Clone)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
    offset: FixedOffset,
}

impl TradingCalendar {
    /// `days` must be strictly increasing; `utc_offset_hours` is the exchange's
    /// offset from UTC used to find a tweet's local date.
    pub fn new(days: Vec<NaiveDate>, utc_offset_hours: i32) -> Result<Self> {
        if days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("trading days must be strictly increasing".into()));
        }
        let offset = FixedOffset::east_opt(utc_offset_hours * 3600)
            .ok_or_else(|| Error::config("windows.utc_offset_hours", "out of range"))?;
        Ok(Self { days, offset })
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    /// Index of the trading day a timestamp accrues to: its local date if that
    /// is a trading day, else the next trading day. `None` past the calendar end.
    pub fn bucket(&self, at: chrono::DateTime<chrono::Utc>) -> Option<usize> {
        let local = at.with_timezone(&self.offset).date_naive();
        let idx = self.days.partition_point(|d| *d < local);
        (idx < self.days.len()).then_some(idx)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignalStats {
    pub matched_main: usize,
    pub matched_related: usize,
    pub unmatched: usize,
    pub unscored: usize,
    pub out_of_calendar: usize,
    pub filtered_authors: usize,
}

#[derive(Debug, Clone)]
pub struct SignalEngine<'a> {
    pub ticker: &'a str,
    pub dictionary: &'a KeywordDictionary,
    pub influencers: &'a BTreeMap<String, u64>,
    /// When set, only tweets by these authors are considered.
    pub author_filter: Option<&'a std::collections::BTreeSet<String>>,
    pub calendar: &'a TradingCalendar,
    pub config: EffectConfig,
}

impl SignalEngine<'_> {
    /// Produces one signal per calendar day, in date order.
    pub fn run(&self, tweets: &[TweetRecord], provider: &SentimentProvider) -> Result<(Vec<DailySignal>, SignalStats)> {
        self.config.validate()?;
        let mut stats = SignalStats::default();

        let mut candidates: Vec<(usize, MatchKind, &TweetRecord)> = Vec::new();
        for tw in tweets {
            if let Some(filter) = self.author_filter {
                if !filter.contains(&tw.author_id) {
                    stats.filtered_authors += 1;
                    continue;
                }
            }
            let kind = match_tweet(&tw.text, self.dictionary);
            match kind {
                MatchKind::None => {
                    stats.unmatched += 1;
                    continue;
                }
                MatchKind::Main => stats.matched_main += 1,
                MatchKind::Related => stats.matched_related += 1,
            }
            match self.calendar.bucket(tw.created_at) {
                Some(day) => candidates.push((day, kind, tw)),
                None => stats.out_of_calendar += 1,
            }
        }

        let requests: Vec<(&str, &str)> = candidates
            .iter()
            .map(|(_, _, tw)| (tw.id.as_str(), tw.text.as_str()))
            .collect();
        let results = provider.score_all(&requests);

        let mut per_day: Vec<Vec<f64>> = vec![Vec::new(); self.calendar.days.len()];
        for ((day, kind, tw), result) in candidates.iter().zip(results) {
            let Some(result) = result else {
                stats.unscored += 1;
                continue;
            };
            let inputs = EffectInputs {
                retweets: tw.retweet_count,
                likes: tw.like_count,
                replies: tw.reply_count,
                influencer_score: self.influencers.get(&tw.author_id).copied().unwrap_or(0) as f64,
                match_kind: *kind,
            };
            let es = inputs.score(&self.config)?;
            per_day[*day].push(signed_score(es, result.polarity));
        }

        let signals = self
            .calendar
            .days
            .iter()
            .zip(&per_day)
            .map(|(date, scores)| DailySignal {
                ticker: self.ticker.to_string(),
                date: *date,
                sentiment_value: daily_sentiment(scores),
            })
            .collect();
        Ok((signals, stats))
    }
}
