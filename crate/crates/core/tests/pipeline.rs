use std::collections::BTreeMap;
use std::path::Path;

use kgtrader::agent::AgentKind;
use kgtrader::config::RunConfig;
use kgtrader::ingest::load_daily_signals;
use kgtrader::pipeline::{self, agent_dir, CONFIG_ECHO};
use kgtrader::Error;

fn demo(out: &Path) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo/demo.toml");
    let mut cfg = RunConfig::load(path).unwrap();
    cfg.out = out.to_path_buf();
    cfg.agent.epochs = 1;
    cfg.validate().unwrap();
    cfg
}

/// Daily GARAN signal recomputed straight from the raw fixture files.
fn oracle_signal(cfg: &RunConfig) -> BTreeMap<String, f64> {
    let mut followers: BTreeMap<String, u64> = BTreeMap::new();
    for line in std::fs::read_to_string(&cfg.paths.edges).unwrap().lines().skip(1) {
        let (_, followee) = line.split_once(',').unwrap();
        *followers.entry(followee.to_string()).or_default() += 1;
    }
    let main = ["garanti bbva", "garan", "garanti"];
    let related = ["bbva", "doğuş holding", "recep baştuğ", "bonus card", "turkey"];
    let positive = ["yükseliş", "güçlü", "kazanç", "harika", "rekor", "alım"];
    let negative = ["düşüş", "zayıf", "zarar", "kötü", "kayıp", "satış"];
    let has_word = |text: &str, w: &str| {
        let padded = format!(" {text} ");
        padded.contains(&format!(" {w} "))
    };

    let mut per_day: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in std::fs::read_to_string(&cfg.paths.tweets).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let text = v["text"].as_str().unwrap().to_lowercase();
        let is_main = main.iter().any(|k| has_word(&text, k));
        let is_related = related.iter().any(|k| has_word(&text, k));
        if !is_main && !is_related {
            continue;
        }
        let pos = text.split(' ').filter(|t| positive.contains(t)).count();
        let neg = text.split(' ').filter(|t| negative.contains(t)).count();
        let polarity = match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => 0.0,
        };
        let rt = v["retweet_count"].as_u64().unwrap() as f64;
        let likes = v["like_count"].as_u64().unwrap() as f64;
        let replies = v["reply_count"].as_u64().unwrap() as f64;
        let author = v["author_id"].as_str().unwrap();
        let is = *followers.get(author).unwrap_or(&0) as f64;
        let ib = 2.0 + rt + likes + replies;
        let es = if is_main { ib + is } else { (ib + is) / 4.0 };
        let day = v["created_at"].as_str().unwrap()[..10].to_string();
        per_day.entry(day).or_default().push(polarity * es);
    }
    per_day
        .into_iter()
        .map(|(day, scores)| {
            let norm = scores.iter().map(|s| s * s).sum::<f64>().sqrt();
            let value = if norm == 0.0 {
                0.0
            } else {
                scores.iter().map(|s| s / norm).sum()
            };
            (day, value)
        })
        .collect()
}

#[test]
fn signals_match_independent_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo(dir.path());
    pipeline::cmd_ingest(&cfg).unwrap();
    pipeline::cmd_community(&cfg).unwrap();
    pipeline::cmd_expand(&cfg).unwrap();
    pipeline::cmd_signals(&cfg).unwrap();

    let signals = load_daily_signals(dir.path().join("signals/signals.csv")).unwrap();
    let garan: Vec<_> = signals.iter().filter(|s| s.ticker == "GARAN").collect();
    let oracle = oracle_signal(&cfg);
    assert_eq!(garan.len(), 210);
    let mut compared = 0;
    for s in &garan {
        let expect = oracle.get(&s.date.to_string()).copied().unwrap_or(0.0);
        assert!(
            (s.sentiment_value - expect).abs() <= 1e-12 * expect.abs().max(1.0),
            "{}: {} vs {expect}",
            s.date,
            s.sentiment_value
        );
        compared += usize::from(expect != 0.0);
    }
    assert!(compared > 150, "only {compared} non-zero days");

    // Sentiment sign announces the next close move.
    let closes: Vec<f64> = std::fs::read_to_string(cfg.price_path("GARAN"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (t, s) in garan.iter().enumerate().take(closes.len() - 1) {
        if s.sentiment_value != 0.0 {
            assert_eq!(
                s.sentiment_value.signum(),
                (closes[t + 1] - closes[t]).signum(),
                "{}",
                s.date
            );
        }
    }
}

#[test]
fn stages_name_missing_predecessor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo(dir.path());
    let expect = |r: Result<String, Error>, cmd: &str| match r {
        Err(Error::MissingStage { command, .. }) => assert_eq!(command, format!("kgtrader {cmd}")),
        other => panic!("expected missing {cmd}, got {other:?}"),
    };
    expect(pipeline::cmd_community(&cfg), "ingest");
    pipeline::cmd_ingest(&cfg).unwrap();
    expect(pipeline::cmd_signals(&cfg), "community");
    pipeline::cmd_community(&cfg).unwrap();
    expect(pipeline::cmd_signals(&cfg), "expand");
    pipeline::cmd_expand(&cfg).unwrap();
    expect(pipeline::cmd_train(&cfg), "signals");
    pipeline::cmd_signals(&cfg).unwrap();
    match pipeline::cmd_backtest(&cfg) {
        Err(Error::MissingStage { command, .. }) => assert_eq!(command, "kgtrader train"),
        other => panic!("expected missing train, got {other:?}"),
    }
}

#[test]
fn full_run_writes_tree_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = demo(dir.path());
    cfg.select_tickers(&["AKBNK".into()]).unwrap();
    let table = pipeline::run_all(&cfg).unwrap();
    assert_eq!(table.columns, ["DQN", "CA-DQN", "DDQN", "CA-DDQN", "DDDQN", "CA-DDDQN"]);
    assert_eq!(table.rows.len(), 1);

    for kind in AgentKind::ALL {
        for ca in [false, true] {
            let d = agent_dir(&cfg, "AKBNK", kind, ca);
            for f in [
                "reward.csv",
                "loss.csv",
                "trades.csv",
                "report.txt",
                "agent.ckpt",
                "overlay.csv",
                "reward.svg",
                CONFIG_ECHO,
            ] {
                assert!(d.join(f).is_file(), "{}", d.join(f).display());
            }
            let reward = std::fs::read_to_string(d.join("reward.csv")).unwrap();
            assert_eq!(reward.lines().count(), 1 + cfg.agent.epochs);
        }
    }
    let comparison = dir.path().join("comparison.csv");
    let first = std::fs::read(&comparison).unwrap();
    let ckpt = agent_dir(&cfg, "AKBNK", AgentKind::Dddqn, true).join("agent.ckpt");
    let first_ckpt = std::fs::read(&ckpt).unwrap();
    pipeline::cmd_train(&cfg).unwrap();
    pipeline::cmd_backtest(&cfg).unwrap();
    assert_eq!(std::fs::read(&comparison).unwrap(), first);
    assert_eq!(std::fs::read(&ckpt).unwrap(), first_ckpt);

    let echo = std::fs::read_to_string(dir.path().join(CONFIG_ECHO)).unwrap();
    let back = RunConfig::from_toml(&echo).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn zero_signal_makes_ca_and_plain_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = demo(dir.path());
    cfg.select_tickers(&["GARAN".into()]).unwrap();
    cfg.run.agents = vec![AgentKind::Dqn];
    // Influencer-only filtering with an unreachable threshold leaves every day at zero.
    cfg.community.influencers_only = true;
    cfg.community.influencer_threshold = 1_000_000;
    pipeline::run_all(&cfg).unwrap();
    let signals = load_daily_signals(dir.path().join("signals/signals.csv")).unwrap();
    assert!(signals.iter().all(|s| s.sentiment_value == 0.0));
    let read = |ca| std::fs::read(agent_dir(&cfg, "GARAN", AgentKind::Dqn, ca).join("trades.csv")).unwrap();
    assert_eq!(read(false), read(true));
    let table = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], row[2]);
}
