//! Stage commands over a validated [`RunConfig`]. Each stage reads its
//! predecessors' outputs from the output directory and rewrites its own
//! outputs deterministically.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentCheckpoint, AgentConfig, AgentKind};
use crate::backtest::{
    compare_agents, curves_csv, emit_comparison, emit_curves, evaluate, loss_csv, random_policy_profits, read_curves,
    reward_csv, ComparisonTable, ExperimentReport,
};
use crate::config::{Backend, RunConfig};
use crate::env::{MarketEnv, MarketWindow};
use crate::error::{Error, Result};
use crate::ingest::{
    load_daily_signals, load_follow_edges, load_market_csv, load_relations, load_tweets_jsonl, store_daily_signals,
    write_atomic, MarketBar, PriceScaler,
};
use crate::knowledge::{expand_keywords, KeywordDictionary};
use crate::rng::derive_seed;
use crate::sentiment::{load_prescored, store_prescored, Lexicon, RemoteService, SentimentProvider};
use crate::signal::{DailySignal, SignalEngine, TradingCalendar};
use crate::social::{build_graph, influencer_scores, read_scores, top_influencers, write_scores};

pub const CONFIG_ECHO: &str = "config.resolved.toml";

fn ingest_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("ingest")
}

fn community_file(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("community").join("influencers.csv")
}

fn keywords_file(cfg: &RunConfig, symbol: &str) -> PathBuf {
    cfg.out.join("expand").join(format!("{symbol}.keywords.json"))
}

fn signals_file(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("signals").join("signals.csv")
}

/// Output directory of one trained agent, e.g. `out/GARAN/CA-DQN`.
pub fn agent_dir(cfg: &RunConfig, symbol: &str, kind: AgentKind, community: bool) -> PathBuf {
    cfg.out.join(symbol).join(kind.label(community))
}

fn require(path: &Path, what: &str, command: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingStage {
            what: format!("{what} ({})", path.display()),
            command: format!("kgtrader {command}"),
        })
    }
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    write_atomic(&dir.join(CONFIG_ECHO), cfg.echo()?.as_bytes())
}

/// Price bars of one ticker split into the train window and a test window
/// that starts `warmup` bars before the first test day.
#[derive(Debug, Clone)]
pub struct TickerBars {
    pub all: Vec<MarketBar>,
    pub train: Vec<MarketBar>,
    pub test: Vec<MarketBar>,
    pub scaler: PriceScaler,
}

pub fn load_ticker_bars(cfg: &RunConfig, symbol: &str) -> Result<TickerBars> {
    let w = &cfg.windows;
    let path = cfg.price_path(symbol);
    let all: Vec<MarketBar> = load_market_csv(&path)?
        .into_iter()
        .filter(|b| b.date >= w.train_start && b.date <= w.test_end)
        .collect();
    let train: Vec<MarketBar> = all.iter().filter(|b| b.date <= w.train_end).cloned().collect();
    let first_test = all.partition_point(|b| b.date < w.test_start);
    let warmup = cfg.env.warmup_days;
    if first_test < warmup {
        return Err(Error::InvalidInput(format!(
            "{symbol}: only {first_test} bars precede the test window, need {warmup} for warmup"
        )));
    }
    let test = all[first_test - warmup..].to_vec();
    let needed = warmup + 2;
    for (name, bars) in [("train", &train), ("test", &test)] {
        if bars.len() < needed {
            return Err(Error::InvalidInput(format!(
                "{symbol}: {name} window has {} bars, need at least {needed}",
                bars.len()
            )));
        }
    }
    let closes: Vec<f64> = train.iter().map(|b| b.close).collect();
    let scaler = PriceScaler::fit(&closes)?;
    Ok(TickerBars {
        all,
        train,
        test,
        scaler,
    })
}

/// Validates every input file and writes per-ticker normalized series plus a
/// manifest.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<String> {
    let dir = ingest_dir(cfg);
    let mut manifest = String::new();
    for t in &cfg.tickers {
        let bars = load_ticker_bars(cfg, &t.symbol)?;
        let mut csv = String::from("date,close,close_norm\n");
        for b in &bars.all {
            let _ = writeln!(csv, "{},{},{}", b.date, b.close, bars.scaler.apply(b.close));
        }
        write_atomic(&dir.join(format!("{}.normalized.csv", t.symbol)), csv.as_bytes())?;
        let _ = writeln!(
            manifest,
            "{}: {} bars, train {}, test {} (incl. {} warmup), scaler min {} max {}",
            t.symbol,
            bars.all.len(),
            bars.train.len(),
            bars.test.len(),
            cfg.env.warmup_days,
            bars.scaler.min,
            bars.scaler.max
        );
    }
    let tweets = load_tweets_jsonl(&cfg.paths.tweets)?;
    let edges = load_follow_edges(&cfg.paths.edges)?;
    let relations = load_relations(&cfg.paths.relations)?;
    let _ = writeln!(
        manifest,
        "tweets: {} loaded, {} skipped\nedges: {}\nrelations: {}",
        tweets.records.len(),
        tweets.skipped,
        edges.len(),
        relations.len()
    );
    write_atomic(&dir.join("manifest.txt"), manifest.as_bytes())?;
    echo_config(cfg, &cfg.out)?;
    Ok(manifest)
}

fn require_ingest(cfg: &RunConfig) -> Result<()> {
    require(&ingest_dir(cfg).join("manifest.txt"), "validated inputs", "ingest")
}

/// Influencer scores of every community member.
pub fn cmd_community(cfg: &RunConfig) -> Result<String> {
    require_ingest(cfg)?;
    let graph = build_graph(&load_follow_edges(&cfg.paths.edges)?)?;
    let scores = influencer_scores(&graph);
    write_scores(community_file(cfg), &scores)?;
    let top = top_influencers(&scores, cfg.community.influencer_threshold);
    let mut summary = format!(
        "nodes: {}\nedges: {}\ninfluencers (> {} followers): {}\n",
        graph.node_count(),
        graph.edge_count(),
        cfg.community.influencer_threshold,
        top.len()
    );
    for u in &top {
        let _ = writeln!(summary, "  {u} {}", scores[u]);
    }
    write_atomic(&cfg.out.join("community").join("summary.txt"), summary.as_bytes())?;
    Ok(summary)
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredKeywords {
    main: Vec<String>,
    related: Vec<String>,
}

/// Keyword dictionaries per ticker.
pub fn cmd_expand(cfg: &RunConfig) -> Result<String> {
    require_ingest(cfg)?;
    let relations = load_relations(&cfg.paths.relations)?;
    let mut report = String::new();
    for t in &cfg.tickers {
        let extra: BTreeSet<String> = t.main_keywords.iter().cloned().collect();
        let dict = expand_keywords(&t.entity, &relations, &extra)?;
        let stored = StoredKeywords {
            main: dict.main_keywords().map(String::from).collect(),
            related: dict.related_keywords().map(String::from).collect(),
        };
        let json = serde_json::to_string_pretty(&stored).expect("keywords serialize");
        write_atomic(&keywords_file(cfg, &t.symbol), json.as_bytes())?;
        let text = dict.report(&t.symbol);
        write_atomic(
            &cfg.out.join("expand").join(format!("{}.txt", t.symbol)),
            text.as_bytes(),
        )?;
        report.push_str(&text);
    }
    Ok(report)
}

fn load_keywords(cfg: &RunConfig, symbol: &str) -> Result<KeywordDictionary> {
    let path = keywords_file(cfg, symbol);
    require(&path, &format!("keywords for {symbol}"), "expand")?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let stored: StoredKeywords =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line() as u64, e.to_string()))?;
    Ok(KeywordDictionary::from_lists(
        stored.main.iter().map(String::as_str),
        stored.related.iter().map(String::as_str),
    ))
}

fn remote_cache_file(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("signals").join("remote_cache.csv")
}

fn provider(cfg: &RunConfig) -> Result<SentimentProvider> {
    let s = &cfg.sentiment;
    Ok(match s.backend {
        Backend::Lexicon => SentimentProvider::Lexicon(Lexicon::load(
            s.positive
                .as_ref()
                .ok_or_else(|| Error::config("sentiment.positive", "missing"))?,
            s.negative
                .as_ref()
                .ok_or_else(|| Error::config("sentiment.negative", "missing"))?,
        )?),
        Backend::Prescored => SentimentProvider::Prescored(load_prescored(
            s.prescored
                .as_ref()
                .ok_or_else(|| Error::config("sentiment.prescored", "missing"))?,
        )?),
        Backend::Remote => {
            let cache_path = remote_cache_file(cfg);
            let cache = if cache_path.is_file() {
                load_prescored(&cache_path)?
            } else {
                Default::default()
            };
            SentimentProvider::Remote(RemoteService::new(s.remote_config()?).with_cache(cache))
        }
    })
}

/// Daily signal table for all tickers.
pub fn cmd_signals(cfg: &RunConfig) -> Result<String> {
    require_ingest(cfg)?;
    let scores_path = community_file(cfg);
    require(&scores_path, "influencer scores", "community")?;
    let scores: BTreeMap<String, u64> = read_scores(&scores_path)?;
    let influencers = top_influencers(&scores, cfg.community.influencer_threshold);
    let tweets = load_tweets_jsonl(&cfg.paths.tweets)?.records;
    let provider = provider(cfg)?;

    let mut all: Vec<DailySignal> = Vec::new();
    let mut report = String::new();
    let mut tickers: Vec<_> = cfg.tickers.iter().collect();
    tickers.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    for t in tickers {
        let dict = load_keywords(cfg, &t.symbol)?;
        let bars = load_ticker_bars(cfg, &t.symbol)?;
        let calendar = TradingCalendar::new(bars.all.iter().map(|b| b.date).collect(), cfg.windows.utc_offset_hours)?;
        let engine = SignalEngine {
            ticker: &t.symbol,
            dictionary: &dict,
            influencers: &scores,
            author_filter: cfg.community.influencers_only.then_some(&influencers),
            calendar: &calendar,
            config: cfg.signal,
        };
        let (signals, stats) = engine.run(&tweets, &provider)?;
        let _ = writeln!(
            report,
            "{}: days {}, main {}, related {}, unmatched {}, unscored {}, outside calendar {}, filtered authors {}",
            t.symbol,
            signals.len(),
            stats.matched_main,
            stats.matched_related,
            stats.unmatched,
            stats.unscored,
            stats.out_of_calendar,
            stats.filtered_authors
        );
        all.extend(signals);
    }
    if let SentimentProvider::Remote(svc) = &provider {
        store_prescored(remote_cache_file(cfg), &svc.cache_snapshot())?;
        let _ = writeln!(report, "remote scoring failures: {}", svc.failures());
    }
    store_daily_signals(signals_file(cfg), &all)?;
    write_atomic(&cfg.out.join("signals").join("stats.txt"), report.as_bytes())?;
    Ok(report)
}

fn ticker_signals(cfg: &RunConfig, symbol: &str) -> Result<Vec<DailySignal>> {
    let path = signals_file(cfg);
    require(&path, "daily signals", "signals")?;
    Ok(load_daily_signals(&path)?
        .into_iter()
        .filter(|s| s.ticker == symbol)
        .collect())
}

/// One (ticker, agent kind, community flag) experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub symbol: String,
    pub kind: AgentKind,
    pub community: bool,
}

pub fn jobs(cfg: &RunConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for t in &cfg.tickers {
        for &kind in &cfg.run.agents {
            for &community in cfg.run.community_aware.flags() {
                out.push(Job {
                    symbol: t.symbol.clone(),
                    kind,
                    community,
                });
            }
        }
    }
    out
}

/// Seed of a job. Community-aware and baseline runs share it, so they differ
/// only in the sentiment they see.
pub fn job_seed(seed: u64, job: &Job) -> u64 {
    derive_seed(seed, &format!("{}/{}", job.symbol, job.kind))
}

fn window(bars: &[MarketBar], scaler: &PriceScaler, signals: &[DailySignal], community: bool) -> MarketWindow {
    let w = MarketWindow::new(bars, scaler, signals);
    if community {
        w
    } else {
        w.without_sentiment()
    }
}

fn train_job(cfg: &RunConfig, seed: u64, job: &Job) -> Result<String> {
    let bars = load_ticker_bars(cfg, &job.symbol)?;
    let signals = ticker_signals(cfg, &job.symbol)?;
    let agent_cfg = AgentConfig {
        kind: job.kind,
        seed: job_seed(seed, job),
        ..cfg.agent.clone()
    };
    let mut env = MarketEnv::new(window(&bars.train, &bars.scaler, &signals, job.community), cfg.env)?;
    let mut agent = Agent::new(agent_cfg)?;
    let curves = agent.train(&mut env)?;
    let dir = agent_dir(cfg, &job.symbol, job.kind, job.community);
    AgentCheckpoint::from_agent(&agent, job.community).save(dir.join("agent.ckpt"))?;
    write_atomic(&dir.join("curves.csv"), curves_csv(&curves).as_bytes())?;
    write_atomic(&dir.join("reward.csv"), reward_csv(&curves).as_bytes())?;
    write_atomic(&dir.join("loss.csv"), loss_csv(&curves).as_bytes())?;
    echo_config(cfg, &dir)?;
    let last = curves.last().map_or(0.0, |c| c.total_reward);
    Ok(format!(
        "{} {}: {} epochs, final epoch reward {last:.4}",
        job.symbol,
        job.kind.label(job.community),
        curves.len()
    ))
}

/// Trains every configured job; jobs run in parallel and results are
/// reported in job order.
pub fn cmd_train(cfg: &RunConfig) -> Result<String> {
    let seed = cfg.require_seed()?;
    require(&signals_file(cfg), "daily signals", "signals")?;
    let lines: Vec<String> = jobs(cfg)
        .par_iter()
        .map(|job| {
            info!("training {} {}", job.symbol, job.kind.label(job.community));
            train_job(cfg, seed, job)
        })
        .collect::<Result<_>>()?;
    echo_config(cfg, &cfg.out)?;
    Ok(lines.join("\n") + "\n")
}

fn backtest_job(cfg: &RunConfig, seed: u64, job: &Job) -> Result<ExperimentReport> {
    let dir = agent_dir(cfg, &job.symbol, job.kind, job.community);
    let ckpt_path = dir.join("agent.ckpt");
    let what = format!("trained {} for {}", job.kind.label(job.community), job.symbol);
    require(&ckpt_path, &what, "train")?;
    require(&dir.join("curves.csv"), &what, "train")?;
    let ckpt = AgentCheckpoint::load(&ckpt_path)?;
    if ckpt.config.kind != job.kind || ckpt.community != job.community {
        return Err(Error::Checkpoint(format!(
            "{} does not hold {what}",
            ckpt_path.display()
        )));
    }
    let curves = read_curves(&dir.join("curves.csv"))?;
    let bars = load_ticker_bars(cfg, &job.symbol)?;
    let signals = ticker_signals(cfg, &job.symbol)?;
    let mut env = MarketEnv::new(window(&bars.test, &bars.scaler, &signals, job.community), cfg.env)?;
    let evaluation = evaluate(&ckpt.model, &mut env, cfg.backtest.long_only)?;
    let random = random_policy_profits(
        &mut env,
        cfg.backtest.long_only,
        cfg.backtest.random_policies,
        derive_seed(seed, &format!("{}/random", job.symbol)),
    )?;
    let first_test = bars.test[cfg.env.warmup_days].date;
    let span = |b: &[MarketBar]| -> (NaiveDate, NaiveDate) { (b[0].date, b[b.len() - 1].date) };
    let report = ExperimentReport {
        ticker: job.symbol.clone(),
        kind: job.kind,
        community: job.community,
        train_window: span(&bars.train),
        test_window: (first_test, span(&bars.test).1),
        curves,
        evaluation,
        random_baseline: Some(random.iter().sum::<f64>() / random.len() as f64),
    };
    emit_curves(&report, &dir)?;
    Ok(report)
}

/// Evaluates every trained job on its test window and writes the comparison table.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<ComparisonTable> {
    let seed = cfg.require_seed()?;
    let reports: Vec<ExperimentReport> = jobs(cfg)
        .par_iter()
        .map(|job| backtest_job(cfg, seed, job))
        .collect::<Result<_>>()?;
    let table = compare_agents(&reports);
    emit_comparison(&table, &cfg.out)?;
    echo_config(cfg, &cfg.out)?;
    Ok(table)
}

/// Every stage in order.
pub fn run_all(cfg: &RunConfig) -> Result<ComparisonTable> {
    cmd_ingest(cfg)?;
    cmd_community(cfg)?;
    cmd_expand(cfg)?;
    cmd_signals(cfg)?;
    cmd_train(cfg)?;
    cmd_backtest(cfg)
}
