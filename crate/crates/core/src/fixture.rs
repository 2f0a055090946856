//! Seeded synthetic datasets in which sentiment predicts the next price move.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, TimeZone, Utc, Weekday};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::Result;
use crate::ingest::{write_atomic, MarketBar};
use crate::rng::{derive_seed, seeded, Rng};
use crate::signal::DailySignal;

/// Weekdays from `start` onwards.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Bars plus a daily signal whose sign on day `t` equals the sign of
/// `close[t + 1] − close[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub bars: Vec<MarketBar>,
    pub signals: Vec<DailySignal>,
}

impl SyntheticMarket {
    pub fn split_at(&self, n: usize) -> (SyntheticMarket, SyntheticMarket) {
        let (a, b) = self.bars.split_at(n);
        let (sa, sb) = self.signals.split_at(n);
        (
            SyntheticMarket {
                bars: a.to_vec(),
                signals: sa.to_vec(),
            },
            SyntheticMarket {
                bars: b.to_vec(),
                signals: sb.to_vec(),
            },
        )
    }
}

/// Random walk with daily moves of 0.5–3 % whose direction is announced by
/// the previous day's sentiment. Sentiment magnitudes lie in [0.3, 1].
pub fn predictive_market(ticker: &str, start: NaiveDate, days: usize, seed: u64) -> SyntheticMarket {
    let mut rng = seeded(derive_seed(seed, &format!("market/{ticker}")));
    let dates = business_days(start, days);
    let dirs: Vec<f64> = (0..days).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let mut close: f64 = 20.0 + rng.gen_range(0.0..10.0);
    let mut bars = Vec::with_capacity(days);
    let mut signals = Vec::with_capacity(days);
    for (t, date) in dates.into_iter().enumerate() {
        let open = if t == 0 {
            close
        } else {
            close * (1.0 + rng.gen_range(-0.002..0.002))
        };
        let high = open.max(close) * (1.0 + rng.gen_range(0.0..0.01));
        let low = open.min(close) * (1.0 - rng.gen_range(0.0..0.01));
        bars.push(MarketBar {
            date,
            open,
            high,
            low,
            close,
            volume: rng.gen_range(100_000..5_000_000),
        });
        signals.push(DailySignal {
            ticker: ticker.to_string(),
            date,
            sentiment_value: dirs[t] * rng.gen_range(0.3..1.0),
        });
        close *= 1.0 + dirs[t] * rng.gen_range(0.005..0.03);
    }
    SyntheticMarket { bars, signals }
}

struct DemoTicker {
    symbol: &'static str,
    entity: &'static str,
    main: &'static [&'static str],
    relations: &'static [(&'static str, &'static str)],
}

const DEMO_TICKERS: [DemoTicker; 3] = [
    DemoTicker {
        symbol: "GARAN",
        entity: "Garanti BBVA",
        main: &["garan", "garanti"],
        relations: &[
            ("parentCompany", "BBVA"),
            ("parentCompany", "Doğuş Holding"),
            ("KeyPerson", "Recep Baştuğ"),
            ("product", "Bonus Card"),
            ("LocationCountry", "Turkey"),
        ],
    },
    DemoTicker {
        symbol: "AKBNK",
        entity: "Akbank",
        main: &["akbnk"],
        relations: &[
            ("parentCompany", "Sabancı Holding"),
            ("KeyPerson", "Hakan Binbaşgil"),
            ("product", "Axess"),
            ("subsidiary", "Ak Yatırım"),
            ("LocationCountry", "Turkey"),
        ],
    },
    DemoTicker {
        symbol: "ISCTR",
        entity: "İş Bankası",
        main: &["isctr"],
        relations: &[
            ("subsidiary", "İş Yatırım"),
            ("product", "Maximum Kart"),
            ("KeyPerson", "Hakan Aran"),
            ("RegionServed", "Europe"),
            ("LocationCountry", "Turkey"),
        ],
    },
];

pub const POSITIVE_WORDS: [&str; 6] = ["yükseliş", "güçlü", "kazanç", "harika", "rekor", "alım"];
pub const NEGATIVE_WORDS: [&str; 6] = ["düşüş", "zayıf", "zarar", "kötü", "kayıp", "satış"];
const FILLER: [&str; 8] = ["bugün", "hisse", "piyasa", "borsa", "yorum", "grafik", "haber", "seans"];

/// Shape of the generated demo dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemoSpec {
    pub seed: u64,
    pub days: usize,
    pub users: usize,
    pub influencers: usize,
    pub tweets_per_ticker_day: usize,
}

impl Default for DemoSpec {
    fn default() -> Self {
        Self {
            seed: 2020,
            days: 210,
            users: 240,
            influencers: 12,
            tweets_per_ticker_day: 3,
        }
    }
}

/// Index of the first test day in the demo calendar.
pub fn demo_test_start(days: usize) -> usize {
    days * 4 / 5
}

fn demo_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 3, 4).expect("valid date")
}

/// Writes prices, tweets, follower edges, relations, lexicons and a
/// `demo.toml` run config into `dir`. Returns the number of tweets.
pub fn write_demo(dir: &Path, spec: DemoSpec) -> Result<usize> {
    let mut rng = seeded(derive_seed(spec.seed, "demo"));
    let dates = business_days(demo_start(), spec.days);
    let users: Vec<String> = (1..=spec.users).map(|i| format!("u{i:04}")).collect();

    // Influencers are followed by most of the community; everyone else follows a few peers.
    let mut edges = BTreeSet::new();
    for (i, inf) in users.iter().take(spec.influencers).enumerate() {
        let want = (101 + 7 * i).min(spec.users - 1);
        let mut others: Vec<&String> = users.iter().filter(|u| *u != inf).collect();
        others.shuffle(&mut rng);
        for f in others.into_iter().take(want) {
            edges.insert((f.clone(), inf.clone()));
        }
    }
    for u in &users {
        for _ in 0..4 {
            let v = &users[rng.gen_range(0..users.len())];
            if v != u {
                edges.insert((u.clone(), v.clone()));
            }
        }
    }
    let mut edges_csv = String::from("follower,followee\n");
    for (a, b) in &edges {
        let _ = writeln!(edges_csv, "{a},{b}");
    }
    write_atomic(&dir.join("edges.csv"), edges_csv.as_bytes())?;

    let mut relations_csv = String::from("source_entity,relation_type,target_label\n");
    for t in &DEMO_TICKERS {
        for (rel, target) in t.relations {
            let _ = writeln!(relations_csv, "{},{rel},{target}", t.entity);
        }
    }
    write_atomic(&dir.join("relations.csv"), relations_csv.as_bytes())?;

    let lex = |words: &[&str]| words.iter().map(|w| format!("{w}\n")).collect::<String>();
    write_atomic(&dir.join("lexicon/positive.txt"), lex(&POSITIVE_WORDS).as_bytes())?;
    write_atomic(&dir.join("lexicon/negative.txt"), lex(&NEGATIVE_WORDS).as_bytes())?;

    let mut tweets = String::new();
    let mut count = 0usize;
    for t in &DEMO_TICKERS {
        let market = predictive_market(t.symbol, demo_start(), spec.days, spec.seed);
        let mut prices = String::from("date,open,high,low,close,volume\n");
        for b in &market.bars {
            let _ = writeln!(
                prices,
                "{},{:.4},{:.4},{:.4},{:.4},{}",
                b.date, b.open, b.high, b.low, b.close, b.volume
            );
        }
        write_atomic(&dir.join(format!("prices/{}.csv", t.symbol)), prices.as_bytes())?;

        let related: Vec<&str> = t
            .relations
            .iter()
            .filter(|(rel, _)| *rel != "LocationCountry")
            .map(|(_, target)| *target)
            .collect();
        for (day, signal) in dates.iter().zip(&market.signals) {
            let up = signal.sentiment_value > 0.0;
            for _ in 0..spec.tweets_per_ticker_day {
                tweets.push_str(&demo_tweet(&mut rng, t, &related, &users, *day, up, count));
                count += 1;
            }
        }
    }
    // Chatter that mentions no company.
    for _ in 0..count / 10 {
        let day = dates[rng.gen_range(0..dates.len())];
        let text = (0..5)
            .map(|_| *FILLER.choose(&mut rng).expect("filler"))
            .collect::<Vec<_>>()
            .join(" ");
        tweets.push_str(&tweet_line(&mut rng, &users, day, &text, count));
        count += 1;
    }
    write_atomic(&dir.join("tweets.jsonl"), tweets.as_bytes())?;
    write_atomic(&dir.join("demo.toml"), demo_config(&dates, spec).as_bytes())?;
    Ok(count)
}

fn demo_tweet(
    rng: &mut Rng,
    t: &DemoTicker,
    related: &[&str],
    users: &[String],
    day: NaiveDate,
    up: bool,
    n: usize,
) -> String {
    let keyword = if rng.gen_bool(0.7) {
        t.main.choose(rng).expect("main keyword").to_string()
    } else {
        related.choose(rng).expect("related keyword").to_string()
    };
    let words = if up { &POSITIVE_WORDS } else { &NEGATIVE_WORDS };
    let mut parts = vec![keyword];
    // One in five tweets carries no opinion and scores neutral.
    if !rng.gen_bool(0.2) {
        for _ in 0..rng.gen_range(1..=2) {
            parts.push(words.choose(rng).expect("word").to_string());
        }
    }
    parts.push(FILLER.choose(rng).expect("filler").to_string());
    parts.shuffle(rng);
    tweet_line(rng, users, day, &parts.join(" "), n)
}

fn tweet_line(rng: &mut Rng, users: &[String], day: NaiveDate, text: &str, n: usize) -> String {
    // Exchange hours in UTC+3 are 07:00–14:00 UTC.
    let secs = rng.gen_range(7 * 3600..14 * 3600);
    let at = Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).expect("midnight")) + chrono::Duration::seconds(secs);
    let author = &users[rng.gen_range(0..users.len())];
    let line = serde_json::json!({
        "id": format!("t{n:06}"),
        "author_id": author,
        "created_at": at.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        "text": text,
        "retweet_count": rng.gen_range(0..20u64),
        "like_count": rng.gen_range(0..50u64),
        "reply_count": rng.gen_range(0..10u64),
    });
    format!("{line}\n")
}

fn demo_config(dates: &[NaiveDate], spec: DemoSpec) -> String {
    let split = demo_test_start(dates.len());
    let mut s = format!(
        r#"seed = {seed}
out = "out"

[paths]
prices_dir = "prices"
tweets = "tweets.jsonl"
edges = "edges.csv"
relations = "relations.csv"

[sentiment]
backend = "lexicon"
positive = "lexicon/positive.txt"
negative = "lexicon/negative.txt"

[windows]
train_start = "{}"
train_end = "{}"
test_start = "{}"
test_end = "{}"
utc_offset_hours = 3

[agent]
epochs = 3
"#,
        dates[0],
        dates[split - 1],
        dates[split],
        dates[dates.len() - 1],
        seed = spec.seed,
    );
    for t in &DEMO_TICKERS {
        let main = t.main.iter().map(|m| format!("\"{m}\"")).collect::<Vec<_>>().join(", ");
        let _ = write!(
            s,
            "\n[[tickers]]\nsymbol = \"{}\"\nentity = \"{}\"\nmain_keywords = [{main}]\n",
            t.symbol, t.entity
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn market_sentiment_predicts_next_move() {
        let m = predictive_market("X", NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), 200, 5);
        assert_eq!(m.bars.len(), 200);
        for t in 0..199 {
            let mv = m.bars[t + 1].close - m.bars[t].close;
            assert_eq!(mv.signum(), m.signals[t].sentiment_value.signum());
        }
        for b in &m.bars {
            b.validate().unwrap();
            assert!(!matches!(b.date.weekday(), Weekday::Sat | Weekday::Sun));
        }
        assert_eq!(
            m,
            predictive_market("X", NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), 200, 5)
        );
    }

    #[test]
    fn demo_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = DemoSpec {
            days: 40,
            users: 120,
            influencers: 2,
            ..DemoSpec::default()
        };
        let n = write_demo(a.path(), spec).unwrap();
        write_demo(b.path(), spec).unwrap();
        assert_eq!(n, 40 * 3 * 3 + 40 * 3 * 3 / 10);
        for f in ["tweets.jsonl", "edges.csv", "prices/GARAN.csv", "demo.toml"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }
}
