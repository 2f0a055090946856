//! Parsing and validation of external inputs, plus the daily-signal store.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use log::warn;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::knowledge::{EntityRelation, RelationType};
use crate::signal::DailySignal;

/// One daily OHLCV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

impl MarketBar {
    /// Checks the OHLC sandwich: `low <= min(open, close)` and
    /// `high >= max(open, close)`, with all prices finite and positive.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be a positive finite price, got {v}"));
            }
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} exceeds min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} is below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetRecord {
    pub id: String,
    pub author_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub retweet_count: u64,
    pub like_count: u64,
    pub reply_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FollowEdge {
    pub follower: String,
    pub followee: String,
}

/// Closing prices rescaled onto the 0–100 band.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

const PRICE_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn header_index(path: &Path, headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}` in header")))
        })
        .collect()
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Loads a daily price file with header `date,open,high,low,close,volume`.
///
/// Rows come back sorted by date. A malformed row, a duplicate date or an
/// OHLC violation aborts the load with the offending line number.
pub fn load_market_csv(path: impl AsRef<Path>) -> Result<Vec<MarketBar>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader.headers()?.clone();
    let idx = header_index(path, &headers, &PRICE_HEADER)?;

    let mut bars: Vec<(MarketBar, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(path, line, e.to_string())
        })?;
        let line = record_line(&record);
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d")
            .map_err(|e| Error::parse(path, line, format!("bad date `{}`: {e}", field(0))))?;
        let mut prices = [0.0; 4];
        for (k, slot) in prices.iter_mut().enumerate() {
            let raw = field(k + 1);
            *slot = raw
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad {} `{raw}`", PRICE_HEADER[k + 1])))?;
        }
        let volume =
            parse_volume(field(5)).ok_or_else(|| Error::parse(path, line, format!("bad volume `{}`", field(5))))?;
        let bar = MarketBar {
            date,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
            volume,
        };
        bar.validate().map_err(|m| Error::parse(path, line, m))?;
        bars.push((bar, line));
    }

    bars.sort_by_key(|(b, _)| b.date);
    for pair in bars.windows(2) {
        if pair[0].0.date == pair[1].0.date {
            return Err(Error::parse(
                path,
                pair[1].1,
                format!("duplicate date {}", pair[1].0.date),
            ));
        }
    }
    Ok(bars.into_iter().map(|(b, _)| b).collect())
}

// Volumes are counts, but some exporters write them as "1000.0".
fn parse_volume(raw: &str) -> Option<u64> {
    if let Ok(v) = raw.parse::<u64>() {
        return Some(v);
    }
    let v = raw.parse::<f64>().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64).then_some(v as u64)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdField {
    Text(String),
    Number(u64),
}

impl IdField {
    fn into_string(self) -> String {
        match self {
            IdField::Text(s) => s,
            IdField::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct RawTweet {
    id: IdField,
    author_id: IdField,
    created_at: String,
    text: String,
    retweet_count: u64,
    like_count: u64,
    reply_count: u64,
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S")
        .ok()
        .map(|n| n.and_utc())
}

/// Streams tweets from a JSONL file.
///
/// Lines that fail the schema, carry an unparseable timestamp, or repeat an
/// earlier id are skipped with a warning and counted in [`skipped`](Self::skipped).
pub struct TweetReader<R> {
    lines: std::io::Lines<R>,
    path: PathBuf,
    line_no: u64,
    seen: HashSet<String>,
    skipped: usize,
}

impl<R: BufRead> TweetReader<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>) -> Self {
        Self {
            lines: reader.lines(),
            path: path.into(),
            line_no: 0,
            seen: HashSet::new(),
            skipped: 0,
        }
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    fn skip(&mut self, why: impl std::fmt::Display) {
        warn!("{}:{}: skipping tweet: {why}", self.path.display(), self.line_no);
        self.skipped += 1;
    }
}

impl<R: BufRead> Iterator for TweetReader<R> {
    type Item = Result<TweetRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawTweet = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    self.skip(e);
                    continue;
                }
            };
            let Some(created_at) = parse_timestamp(&raw.created_at) else {
                self.skip(format_args!("bad created_at `{}`", raw.created_at));
                continue;
            };
            let id = raw.id.into_string();
            if !self.seen.insert(id.clone()) {
                self.skip(format_args!("duplicate id `{id}`"));
                continue;
            }
            return Some(Ok(TweetRecord {
                id,
                author_id: raw.author_id.into_string(),
                created_at,
                text: raw.text,
                retweet_count: raw.retweet_count,
                like_count: raw.like_count,
                reply_count: raw.reply_count,
            }));
        }
    }
}

pub fn open_tweets(path: impl AsRef<Path>) -> Result<TweetReader<BufReader<File>>> {
    let path = path.as_ref();
    Ok(TweetReader::new(BufReader::new(open(path)?), path))
}

#[derive(Debug, Default)]
pub struct TweetLoad {
    pub records: Vec<TweetRecord>,
    pub skipped: usize,
}

/// Reads a whole tweet file into memory.
pub fn load_tweets_jsonl(path: impl AsRef<Path>) -> Result<TweetLoad> {
    let mut reader = open_tweets(path)?;
    let mut records = Vec::new();
    for r in reader.by_ref() {
        records.push(r?);
    }
    Ok(TweetLoad {
        records,
        skipped: reader.skipped(),
    })
}

/// Loads follower edges from a CSV with header `follower,followee`.
pub fn load_follow_edges(path: impl AsRef<Path>) -> Result<Vec<FollowEdge>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader.headers()?.clone();
    let idx = header_index(path, &headers, &["follower", "followee"])?;
    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let follower = record.get(idx[0]).unwrap_or("").to_string();
        let followee = record.get(idx[1]).unwrap_or("").to_string();
        if follower.is_empty() || followee.is_empty() {
            return Err(Error::parse(path, line, "empty author id"));
        }
        if follower == followee {
            return Err(Error::parse(path, line, format!("self-loop on `{follower}`")));
        }
        edges.push(FollowEdge { follower, followee });
    }
    Ok(edges)
}

/// Loads a relation snapshot with header `source_entity,relation_type,target_label`.
pub fn load_relations(path: impl AsRef<Path>) -> Result<Vec<EntityRelation>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader.headers()?.clone();
    let idx = header_index(path, &headers, &["source_entity", "relation_type", "target_label"])?;
    let mut relations = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let get = |i: usize| record.get(idx[i]).unwrap_or("").to_string();
        let relation_type: RelationType = get(1).parse().map_err(|m: String| Error::parse(path, line, m))?;
        let (source_entity, target_label) = (get(0), get(2));
        if source_entity.is_empty() || target_label.is_empty() {
            return Err(Error::parse(path, line, "empty entity or label"));
        }
        relations.push(EntityRelation {
            source_entity,
            relation_type,
            target_label,
        });
    }
    Ok(relations)
}

/// Affine map from raw prices onto 0–100, fitted on one window and reusable
/// on another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceScaler {
    pub min: f64,
    pub max: f64,
}

impl PriceScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("cannot normalize an empty price list".into()));
        }
        let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidInput("non-finite price".into()));
        }
        Ok(Self { min, max })
    }

    /// A constant fitting window maps everything to the midpoint 50.
    pub fn apply(&self, x: f64) -> f64 {
        if self.max == self.min {
            50.0
        } else {
            (x - self.min) / (self.max - self.min) * 100.0
        }
    }

    pub fn series(&self, bars: &[MarketBar]) -> NormalizedSeries {
        NormalizedSeries {
            dates: bars.iter().map(|b| b.date).collect(),
            values: bars.iter().map(|b| self.apply(b.close)).collect(),
        }
    }
}

/// Min-max rescales closes onto [0, 100].
pub fn normalize_prices(closes: &[f64]) -> Result<Vec<f64>> {
    let scaler = PriceScaler::fit(closes)?;
    Ok(closes.iter().map(|&x| scaler.apply(x)).collect())
}

pub const SIGNAL_HEADER: &str = "ticker,date,sentiment_value";

/// Writes the daily-signal table. Input must be strictly sorted by
/// `(ticker, date)`. The file is written to a sibling temp file and renamed
/// into place so a crash never leaves a truncated table behind.
pub fn store_daily_signals(path: impl AsRef<Path>, signals: &[DailySignal]) -> Result<()> {
    let path = path.as_ref();
    for pair in signals.windows(2) {
        let a = (&pair[0].ticker, pair[0].date);
        let b = (&pair[1].ticker, pair[1].date);
        if a >= b {
            return Err(Error::InvalidInput(format!(
                "daily signals must be strictly sorted by (ticker, date): {} {} then {} {}",
                a.0, a.1, b.0, b.1
            )));
        }
    }
    if let Some(bad) = signals.iter().find(|s| !s.sentiment_value.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite sentiment for {} {}",
            bad.ticker, bad.date
        )));
    }

    let mut body = String::with_capacity(32 * (signals.len() + 1));
    body.push_str(SIGNAL_HEADER);
    body.push('\n');
    for s in signals {
        if s.ticker.contains([',', '"', '\n']) {
            return Err(Error::InvalidInput(format!("ticker `{}` is not CSV-safe", s.ticker)));
        }
        body.push_str(&format!("{},{},{}\n", s.ticker, s.date, s.sentiment_value));
    }
    write_atomic(path, body.as_bytes())
}

pub fn load_daily_signals(path: impl AsRef<Path>) -> Result<Vec<DailySignal>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader.headers()?.clone();
    let idx = header_index(path, &headers, &["ticker", "date", "sentiment_value"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let get = |i: usize| record.get(idx[i]).unwrap_or("");
        let date = NaiveDate::parse_from_str(get(1), "%Y-%m-%d")
            .map_err(|e| Error::parse(path, line, format!("bad date: {e}")))?;
        let sentiment_value = get(2)
            .parse::<f64>()
            .map_err(|e| Error::parse(path, line, format!("bad sentiment_value: {e}")))?;
        out.push(DailySignal {
            ticker: get(0).to_string(),
            date,
            sentiment_value,
        });
    }
    Ok(out)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
