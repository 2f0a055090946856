//! Tweet polarity through interchangeable backends.
//!
//! Downstream math only consumes a class in {+1, −1, 0}. A tweet the backend
//! cannot score is *unscored* (`None`), which is different from neutral: a
//! neutral tweet adds a zero entry to its day's score vector while an
//! unscored tweet is left out entirely.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fold::{fold, tokens};
use crate::ingest::{csv_reader, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub fn numeric_value(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
            Polarity::Neutral => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            other => Err(format!("unknown sentiment label `{other}`")),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentResult {
    pub polarity: Polarity,
    pub confidence: f64,
}

impl SentimentResult {
    pub fn new(polarity: Polarity, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Sentiment(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self { polarity, confidence })
    }
}

/// Majority vote of folded tokens against positive and negative word sets.
/// Ties, including no hits at all, are neutral.
pub fn lexicon_polarity(text: &str, pos_words: &HashSet<String>, neg_words: &HashSet<String>) -> Polarity {
    let (pos, neg) = lexicon_counts(text, pos_words, neg_words);
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Polarity::Positive,
        std::cmp::Ordering::Less => Polarity::Negative,
        std::cmp::Ordering::Equal => Polarity::Neutral,
    }
}

fn lexicon_counts(text: &str, pos_words: &HashSet<String>, neg_words: &HashSet<String>) -> (usize, usize) {
    let folded = fold(text);
    let mut pos = 0;
    let mut neg = 0;
    for tok in tokens(&folded) {
        let tok = tok.trim_start_matches(['#', '@']);
        if pos_words.contains(tok) {
            pos += 1;
        } else if neg_words.contains(tok) {
            neg += 1;
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

impl Lexicon {
    pub fn new<I, J, S, T>(positive: I, negative: J) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let positive: HashSet<String> = positive
            .into_iter()
            .map(|w| fold(w.as_ref().trim()))
            .filter(|w| !w.is_empty())
            .collect();
        let negative: HashSet<String> = negative
            .into_iter()
            .map(|w| fold(w.as_ref().trim()))
            .filter(|w| !w.is_empty())
            .collect();
        if let Some(w) = positive.intersection(&negative).min() {
            return Err(Error::Sentiment(format!(
                "word `{w}` is in both positive and negative lexicons"
            )));
        }
        Ok(Self { positive, negative })
    }

    /// Reads two word lists, one word per line; `#` starts a comment line.
    pub fn load(positive: impl AsRef<Path>, negative: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| -> Result<Vec<String>> {
            let body = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(body
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect())
        };
        Self::new(read(positive.as_ref())?, read(negative.as_ref())?)
    }

    /// Confidence is the vote margin `|pos − neg| / (pos + neg)`, zero without hits.
    pub fn score(&self, text: &str) -> SentimentResult {
        let (pos, neg) = lexicon_counts(text, &self.positive, &self.negative);
        let polarity = lexicon_polarity(text, &self.positive, &self.negative);
        let confidence = if pos + neg == 0 {
            0.0
        } else {
            pos.abs_diff(neg) as f64 / (pos + neg) as f64
        };
        SentimentResult { polarity, confidence }
    }
}

/// Results keyed by tweet id, as read from `tweet_id,label,confidence`.
pub type ScoreTable = BTreeMap<String, SentimentResult>;

pub fn load_prescored(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let mut table = ScoreTable::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").to_string();
        let polarity: Polarity = record
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|m: String| Error::parse(path, line, m))?;
        let confidence: f64 = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e| Error::parse(path, line, format!("bad confidence: {e}")))?;
        let result = SentimentResult::new(polarity, confidence).map_err(|e| Error::parse(path, line, e.to_string()))?;
        table.insert(id, result);
    }
    Ok(table)
}

pub fn store_prescored(path: impl AsRef<Path>, table: &ScoreTable) -> Result<()> {
    let mut body = String::from("tweet_id,label,confidence\n");
    for (id, r) in table {
        body.push_str(&format!("{id},{},{}\n", r.polarity, r.confidence));
    }
    write_atomic(path.as_ref(), body.as_bytes())
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    label: String,
    confidence: f64,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL; requests go to `<endpoint>/score`.
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(10),
            retries: 3,
            backoff: Duration::from_millis(200),
            max_in_flight: 8,
        }
    }
}

/// HTTP classifier client with an id-keyed cache.
pub struct RemoteService {
    config: RemoteConfig,
    agent: ureq::Agent,
    cache: RwLock<ScoreTable>,
    failures: AtomicUsize,
}

impl RemoteService {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            agent,
            cache: RwLock::new(ScoreTable::new()),
            failures: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(self, cache: ScoreTable) -> Self {
        *self.cache.write().expect("cache lock") = cache;
        self
    }

    pub fn cache_snapshot(&self) -> ScoreTable {
        self.cache.read().expect("cache lock").clone()
    }

    /// Requests that exhausted their retries.
    pub fn failures(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }

    fn request_once(&self, text: &str) -> std::result::Result<SentimentResult, String> {
        let url = format!("{}/score", self.config.endpoint.trim_end_matches('/'));
        let mut resp = self
            .agent
            .post(&url)
            .send_json(ScoreRequest { text })
            .map_err(|e| e.to_string())?;
        if resp.status() != 200 {
            return Err(format!("HTTP {}", resp.status()));
        }
        let body: ScoreResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        let polarity: Polarity = body.label.parse()?;
        SentimentResult::new(polarity, body.confidence).map_err(|e| e.to_string())
    }

    pub fn score(&self, id: &str, text: &str) -> Option<SentimentResult> {
        if let Some(hit) = self.cache.read().expect("cache lock").get(id) {
            return Some(*hit);
        }
        let mut delay = self.config.backoff;
        for attempt in 0..=self.config.retries {
            match self.request_once(text) {
                Ok(r) => {
                    self.cache
                        .write()
                        .expect("cache lock")
                        .entry(id.to_string())
                        .or_insert(r);
                    return Some(r);
                }
                Err(e) => {
                    warn!("scoring tweet {id} failed (attempt {}): {e}", attempt + 1);
                    if attempt < self.config.retries {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        self.failures.fetch_add(1, Ordering::Relaxed);
        None
    }
}

/// The active sentiment backend for a run.
pub enum SentimentProvider {
    Lexicon(Lexicon),
    Prescored(ScoreTable),
    Remote(RemoteService),
}

impl SentimentProvider {
    /// Scores one tweet; `None` means unscored.
    pub fn score(&self, id: &str, text: &str) -> Option<SentimentResult> {
        match self {
            SentimentProvider::Lexicon(lex) => Some(lex.score(text)),
            SentimentProvider::Prescored(table) => table.get(id).copied(),
            SentimentProvider::Remote(svc) => svc.score(id, text),
        }
    }

    /// Scores a batch, returning results in input order. The remote backend
    /// keeps at most `max_in_flight` requests open at once.
    pub fn score_all(&self, items: &[(&str, &str)]) -> Vec<Option<SentimentResult>> {
        match self {
            SentimentProvider::Remote(svc) => {
                let workers = svc.config.max_in_flight.max(1).min(items.len().max(1));
                let next = AtomicUsize::new(0);
                let mut out: Vec<Option<SentimentResult>> = vec![None; items.len()];
                let results: Vec<Vec<(usize, Option<SentimentResult>)>> = std::thread::scope(|s| {
                    let handles: Vec<_> = (0..workers)
                        .map(|_| {
                            s.spawn(|| {
                                let mut local = Vec::new();
                                loop {
                                    let i = next.fetch_add(1, Ordering::Relaxed);
                                    let Some(&(id, text)) = items.get(i) else { break };
                                    local.push((i, svc.score(id, text)));
                                }
                                local
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("scoring worker panicked"))
                        .collect()
                });
                for (i, r) in results.into_iter().flatten() {
                    out[i] = r;
                }
                out
            }
            _ => items.iter().map(|(id, text)| self.score(id, text)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn words(ws: &[&str]) -> HashSet<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn lexicon_rules() {
        let pos = words(&["iyi", "yukselis"]);
        let neg = words(&["kotu"]);
        assert_eq!(lexicon_polarity("iyi iyi kötü", &pos, &neg), Polarity::Positive);
        assert_eq!(lexicon_polarity("iyi kötü", &pos, &neg), Polarity::Neutral);
        assert_eq!(lexicon_polarity("hava", &pos, &neg), Polarity::Neutral);
        assert_eq!(lexicon_polarity("KÖTÜ gün", &pos, &neg), Polarity::Negative);
    }

    #[test]
    fn lexicon_backend_scores() {
        let lex = Lexicon::new(["iyi", "yükseliş"], ["kötü"]).unwrap();
        let p = SentimentProvider::Lexicon(lex);
        let empty = p.score("x", "").unwrap();
        assert_eq!((empty.polarity, empty.confidence), (Polarity::Neutral, 0.0));
        let r = p.score("y", "#garan iyi yükseliş").unwrap();
        assert_eq!((r.polarity, r.confidence), (Polarity::Positive, 1.0));
        assert!(Lexicon::new(["a"], ["A"]).is_err());
    }

    #[test]
    fn polarity_numeric_values() {
        assert_eq!(Polarity::Positive.numeric_value(), 1.0);
        assert_eq!(Polarity::Negative.numeric_value(), -1.0);
        assert_eq!(Polarity::Neutral.numeric_value(), 0.0);
    }

    #[test]
    fn prescored_lookup_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        std::fs::write(&path, "tweet_id,label,confidence\nt1,negative,0.9\nt2,Positive,1\n").unwrap();
        let table = load_prescored(&path).unwrap();
        let p = SentimentProvider::Prescored(table.clone());
        let r = p.score("t1", "whatever").unwrap();
        assert_eq!((r.polarity, r.confidence), (Polarity::Negative, 0.9));
        assert!(p.score("t9", "x").is_none());

        store_prescored(&path, &table).unwrap();
        assert_eq!(load_prescored(&path).unwrap(), table);

        std::fs::write(&path, "tweet_id,label,confidence\nt1,negative,1.5\n").unwrap();
        assert!(load_prescored(&path).is_err());
    }

    /// Minimal HTTP server: answers `responses` in order, one per connection.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                assert!(request_line.starts_with("POST /score "), "{request_line}");
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (addr, handle)
    }

    fn quick(endpoint: String) -> RemoteConfig {
        RemoteConfig {
            retries: 2,
            backoff: Duration::from_millis(1),
            max_in_flight: 1,
            ..RemoteConfig::new(endpoint)
        }
    }

    #[test]
    fn remote_scores_retries_and_caches() {
        let (addr, server) = serve(vec![
            (503, "{}".into()),
            (200, r#"{"label":"positive","confidence":0.75}"#.into()),
        ]);
        let svc = RemoteService::new(quick(addr));
        let r = svc.score("t1", "harika").unwrap();
        assert_eq!((r.polarity, r.confidence), (Polarity::Positive, 0.75));
        // Served from the cache; the server is gone after two responses.
        assert_eq!(svc.score("t1", "harika"), Some(r));
        let bodies = server.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(sent, serde_json::json!({"text": "harika"}));
        assert_eq!(svc.cache_snapshot().len(), 1);
        assert_eq!(svc.failures(), 0);
    }

    #[test]
    fn remote_gives_up_as_unscored() {
        let (addr, server) = serve(vec![
            (500, "{}".into()),
            (200, r#"{"label":"bullish","confidence":0.5}"#.into()),
            (200, r#"{"label":"neutral","confidence":7}"#.into()),
        ]);
        let p = SentimentProvider::Remote(RemoteService::new(quick(addr)));
        assert_eq!(p.score_all(&[("t1", "x")]), vec![None]);
        server.join().unwrap();
        let SentimentProvider::Remote(svc) = &p else {
            unreachable!()
        };
        assert_eq!(svc.failures(), 1);
        assert!(svc.cache_snapshot().is_empty());
    }
}
