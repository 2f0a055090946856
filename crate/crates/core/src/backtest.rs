//! Test-window evaluation, profit accounting and report output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rand::Rng as _;

use crate::agent::{greedy, AgentKind, EpochStats};
use crate::env::{Action, Environment, Features, MarketEnv, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::ingest::write_atomic;
use crate::nn::QFunction;
use crate::plot::{line_chart, Series};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Flat,
    Long { entry: f64 },
    Short { entry: f64 },
}

/// What a recorded Buy or Sell did to the position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    Open,
    Close,
    /// Buy while long, Sell while short, or Sell from flat when shorting is off.
    NoOp,
}

impl Fill {
    pub fn label(self) -> &'static str {
        match self {
            Fill::Open => "open",
            Fill::Close => "close",
            Fill::NoOp => "noop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub date: NaiveDate,
    pub action: Action,
    /// Normalized close at which the action executed.
    pub price: f64,
    pub fill: Fill,
}

/// One-unit position ledger. Holds are not recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeLedger {
    pub trades: Vec<Trade>,
    pub position: Position,
    pub long_only: bool,
    /// Profit of closed round trips so far.
    pub realized: f64,
}

impl TradeLedger {
    pub fn new(long_only: bool) -> Self {
        Self {
            trades: Vec::new(),
            position: Position::Flat,
            long_only,
            realized: 0.0,
        }
    }

    pub fn record(&mut self, date: NaiveDate, action: Action, price: f64) {
        let (position, fill) = match (self.position, action) {
            (_, Action::Hold) => return,
            (Position::Flat, Action::Buy) => (Position::Long { entry: price }, Fill::Open),
            (Position::Flat, Action::Sell) if self.long_only => (Position::Flat, Fill::NoOp),
            (Position::Flat, Action::Sell) => (Position::Short { entry: price }, Fill::Open),
            (p @ Position::Long { .. }, Action::Buy) | (p @ Position::Short { .. }, Action::Sell) => (p, Fill::NoOp),
            (Position::Long { entry }, Action::Sell) => {
                self.realized += price - entry;
                (Position::Flat, Fill::Close)
            }
            (Position::Short { entry }, Action::Buy) => {
                self.realized += -(price - entry);
                (Position::Flat, Fill::Close)
            }
        };
        self.position = position;
        self.trades.push(Trade {
            date,
            action,
            price,
            fill,
        });
    }

    /// Buys and Sells that changed the position.
    pub fn executed(&self) -> usize {
        self.trades.iter().filter(|t| t.fill != Fill::NoOp).count()
    }
}

/// Closed round trips plus any open position marked to `final_price`.
pub fn profit(ledger: &TradeLedger, final_price: f64) -> f64 {
    ledger.realized
        + match ledger.position {
            Position::Flat => 0.0,
            Position::Long { entry } => final_price - entry,
            Position::Short { entry } => -(final_price - entry),
        }
}

/// A full pass over a test window.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub ledger: TradeLedger,
    /// Every decision day with its normalized close and chosen action.
    pub decisions: Vec<(NaiveDate, f64, Action)>,
    /// Normalized close of the last day, used to mark open positions.
    pub final_price: f64,
}

impl Evaluation {
    pub fn profit(&self) -> f64 {
        profit(&self.ledger, self.final_price)
    }
}

/// Runs `policy` once over the environment's window.
pub fn evaluate_with(
    env: &mut MarketEnv,
    long_only: bool,
    mut policy: impl FnMut(&Features) -> Action,
) -> Result<Evaluation> {
    let mut ledger = TradeLedger::new(long_only);
    let mut decisions = Vec::with_capacity(env.horizon());
    let mut state = env.reset()?;
    loop {
        let t = env.day();
        let action = policy(&state);
        let (date, price) = (env.window().dates[t], env.window().close_norm[t]);
        ledger.record(date, action, price);
        decisions.push((date, price, action));
        let out = env.step(action)?;
        state = out.next_state;
        if out.done {
            break;
        }
    }
    let final_price = *env.window().close_norm.last().expect("non-empty window");
    Ok(Evaluation {
        ledger,
        decisions,
        final_price,
    })
}

/// Greedy (epsilon 0) evaluation of a Q-function.
pub fn evaluate(q: &impl QFunction, env: &mut MarketEnv, long_only: bool) -> Result<Evaluation> {
    evaluate_with(env, long_only, |s| greedy(&q.q_values(s)))
}

/// Profits of `n` uniformly random policies, each seeded from `seed`.
pub fn random_policy_profits(env: &mut MarketEnv, long_only: bool, n: usize, seed: u64) -> Result<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut rng = seeded(derive_seed(seed, &format!("random-policy-{i}")));
            let ev = evaluate_with(env, long_only, |_| {
                Action::from_index(rng.gen_range(0..NUM_ACTIONS)).expect("index in range")
            })?;
            Ok(ev.profit())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub ticker: String,
    pub kind: AgentKind,
    pub community: bool,
    pub train_window: (NaiveDate, NaiveDate),
    pub test_window: (NaiveDate, NaiveDate),
    pub curves: Vec<EpochStats>,
    pub evaluation: Evaluation,
    /// Mean profit of uniformly random policies on the same window.
    pub random_baseline: Option<f64>,
}

impl ExperimentReport {
    pub fn label(&self) -> String {
        self.kind.label(self.community)
    }

    pub fn profit(&self) -> f64 {
        self.evaluation.profit()
    }

    pub fn trade_count(&self) -> usize {
        self.evaluation.ledger.executed()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ticker: {}", self.ticker);
        let _ = writeln!(s, "agent: {}", self.label());
        let _ = writeln!(s, "train: {} .. {}", self.train_window.0, self.train_window.1);
        let _ = writeln!(s, "test: {} .. {}", self.test_window.0, self.test_window.1);
        let _ = writeln!(s, "epochs: {}", self.curves.len());
        let _ = writeln!(s, "trades: {}", self.trade_count());
        let _ = writeln!(s, "profit (normalized points): {:.4}", self.profit());
        if let Some(b) = self.random_baseline {
            let _ = writeln!(s, "random policy mean profit: {b:.4}");
        }
        let _ = writeln!(
            s,
            "note: overlay.csv pairs the actual normalized close with the chosen action; the agents do not predict prices"
        );
        s
    }
}

/// Column order of the comparison table.
pub fn column_labels() -> Vec<String> {
    AgentKind::ALL
        .iter()
        .flat_map(|k| [k.label(false), k.label(true)])
        .collect()
}

/// Profits per ticker (rows) and agent label (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl ComparisonTable {
    /// Column index of the row maximum; ties go to the leftmost column.
    pub fn best(&self, row: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.rows[row].1.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("ticker,{},best\n", self.columns.join(","));
        for (r, (ticker, values)) in self.rows.iter().enumerate() {
            s.push_str(ticker);
            for v in values {
                s.push(',');
                if let Some(v) = v {
                    let _ = write!(s, "{v:.4}");
                }
            }
            let best = self.best(r).map_or("", |i| self.columns[i].as_str());
            let _ = writeln!(s, ",{best}");
        }
        s
    }

    /// Fixed-width text table; the best profit in each row is starred.
    pub fn to_text(&self) -> String {
        let width = self.columns.iter().map(String::len).max().unwrap_or(0).max(11) + 2;
        let mut s = format!("{:<8}", "Stock");
        for c in &self.columns {
            let _ = write!(s, "{c:>width$}");
        }
        s.push('\n');
        for (r, (ticker, values)) in self.rows.iter().enumerate() {
            let _ = write!(s, "{ticker:<8}");
            let best = self.best(r);
            for (i, v) in values.iter().enumerate() {
                let cell = match v {
                    Some(v) if best == Some(i) => format!("*{v:.2}"),
                    Some(v) => format!("{v:.2}"),
                    None => "-".to_string(),
                };
                let _ = write!(s, "{cell:>width$}");
            }
            s.push('\n');
        }
        s
    }
}

/// Pivots reports into the comparison table. Only agent columns that appear
/// in some report are kept, in the fixed method order.
pub fn compare_agents(reports: &[ExperimentReport]) -> ComparisonTable {
    let present: BTreeSet<String> = reports.iter().map(ExperimentReport::label).collect();
    let columns: Vec<String> = column_labels().into_iter().filter(|c| present.contains(c)).collect();
    let mut by_ticker: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for r in reports {
        let row = by_ticker
            .entry(r.ticker.as_str())
            .or_insert_with(|| vec![None; columns.len()]);
        let col = columns.iter().position(|c| *c == r.label()).expect("column present");
        row[col] = Some(r.profit());
    }
    ComparisonTable {
        columns,
        rows: by_ticker.into_iter().map(|(t, v)| (t.to_string(), v)).collect(),
    }
}

pub fn reward_csv(curves: &[EpochStats]) -> String {
    let mut s = String::from("epoch,total_reward\n");
    for c in curves {
        let _ = writeln!(s, "{},{}", c.epoch, c.total_reward);
    }
    s
}

/// Epochs without a gradient step leave the loss blank.
pub fn loss_csv(curves: &[EpochStats]) -> String {
    let mut s = String::from("epoch,mean_loss\n");
    for c in curves {
        match c.mean_loss {
            Some(l) => {
                let _ = writeln!(s, "{},{}", c.epoch, l);
            }
            None => {
                let _ = writeln!(s, "{},", c.epoch);
            }
        }
    }
    s
}

/// `epoch,total_reward,mean_loss`, the combined training curve.
pub fn curves_csv(curves: &[EpochStats]) -> String {
    let mut s = String::from("epoch,total_reward,mean_loss,steps\n");
    for c in curves {
        let loss = c.mean_loss.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{loss},{}", c.epoch, c.total_reward, c.steps);
    }
    s
}

pub fn read_curves(path: &Path) -> Result<Vec<EpochStats>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == "epoch,total_reward,mean_loss,steps" => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                "expected header epoch,total_reward,mean_loss,steps",
            ))
        }
    }
    lines
        .map(|(i, line)| {
            let bad = |what: &str| Error::parse(path, i as u64 + 1, format!("bad {what}"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad("field count"));
            }
            Ok(EpochStats {
                epoch: f[0].parse().map_err(|_| bad("epoch"))?,
                total_reward: f[1].parse().map_err(|_| bad("total_reward"))?,
                mean_loss: if f[2].is_empty() {
                    None
                } else {
                    Some(f[2].parse().map_err(|_| bad("mean_loss"))?)
                },
                steps: f[3].parse().map_err(|_| bad("steps"))?,
            })
        })
        .collect()
}

pub fn trades_csv(ledger: &TradeLedger) -> String {
    let mut s = String::from("date,action,price_norm,fill\n");
    for t in &ledger.trades {
        let _ = writeln!(s, "{},{},{},{}", t.date, t.action.label(), t.price, t.fill.label());
    }
    s
}

pub fn overlay_csv(ev: &Evaluation) -> String {
    let mut s = String::from("date,close_norm,action\n");
    for (d, p, a) in &ev.decisions {
        let _ = writeln!(s, "{d},{p},{}", a.label());
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    write_atomic(&dir.join(name), contents.as_bytes())
}

/// Writes curve CSVs, trades, the overlay and their charts into `dir`.
pub fn emit_curves(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let label = report.label();
    write(dir, "reward.csv", &reward_csv(&report.curves))?;
    write(dir, "loss.csv", &loss_csv(&report.curves))?;
    write(dir, "trades.csv", &trades_csv(&report.evaluation.ledger))?;
    write(dir, "overlay.csv", &overlay_csv(&report.evaluation))?;
    write(dir, "report.txt", &report.summary())?;

    let epoch_series = |name: &str, f: &dyn Fn(&EpochStats) -> f64| {
        Series::new(name, report.curves.iter().map(|c| (c.epoch as f64, f(c))).collect())
    };
    let reward = epoch_series("total reward", &|c| c.total_reward);
    let loss = epoch_series("mean loss", &|c| c.mean_loss.unwrap_or(f64::NAN));
    write(
        dir,
        "reward.svg",
        &line_chart(
            &format!("{} {label} reward", report.ticker),
            "epoch",
            "total reward",
            &[reward],
        ),
    )?;
    write(
        dir,
        "loss.svg",
        &line_chart(
            &format!("{} {label} loss", report.ticker),
            "epoch",
            "mean loss",
            &[loss],
        ),
    )?;

    let ev = &report.evaluation;
    let price = Series::indexed(
        "close (normalized)",
        &ev.decisions.iter().map(|d| d.1).collect::<Vec<_>>(),
    );
    let marks = |a: Action| {
        Series::new(
            a.label(),
            ev.decisions
                .iter()
                .enumerate()
                .filter(|(_, d)| d.2 == a)
                .map(|(i, d)| (i as f64, d.1))
                .collect(),
        )
        .markers()
    };
    write(
        dir,
        "overlay.svg",
        &line_chart(
            &format!("{} {label} test window", report.ticker),
            "trading day",
            "normalized close",
            &[price, marks(Action::Buy), marks(Action::Sell)],
        ),
    )
}

/// Writes `comparison.csv` and `comparison.txt` into `dir`.
pub fn emit_comparison(table: &ComparisonTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "comparison.csv", &table.to_csv())?;
    write(dir, "comparison.txt", &table.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, MarketWindow};
    use proptest::prelude::*;

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i)
    }

    fn window(prices: &[f64]) -> MarketWindow {
        MarketWindow {
            dates: (0..prices.len() as u64).map(day).collect(),
            closes: prices.iter().map(|p| p + 1.0).collect(),
            close_norm: prices.to_vec(),
            sentiment: vec![0.0; prices.len()],
        }
    }

    fn env(prices: &[f64]) -> MarketEnv {
        MarketEnv::new(
            window(prices),
            EnvConfig {
                warmup_days: 30,
                ..EnvConfig::default()
            },
        )
        .unwrap()
    }

    fn replay(actions: &[Action], prices: &[f64], long_only: bool) -> f64 {
        let mut l = TradeLedger::new(long_only);
        for (i, (&a, &p)) in actions.iter().zip(prices).enumerate() {
            l.record(day(i as u64), a, p);
        }
        profit(&l, *prices.last().unwrap())
    }

    #[test]
    fn profit_examples() {
        assert_eq!(profit(&TradeLedger::new(false), 50.0), 0.0);
        assert_eq!(replay(&[Action::Buy, Action::Sell], &[10.0, 25.0], false), 15.0);
        assert_eq!(replay(&[Action::Sell, Action::Hold], &[40.0, 30.0], false), 10.0);
    }

    #[test]
    fn scripted_ledger_by_hand() {
        use Action::*;
        let prices = [10.0, 12.0, 11.0, 15.0, 14.0, 9.0, 20.0];
        let actions = [Buy, Buy, Hold, Sell, Sell, Buy, Hold];
        let mut l = TradeLedger::new(false);
        for (i, (&a, &p)) in actions.iter().zip(&prices).enumerate() {
            l.record(day(i as u64), a, p);
        }
        let fills: Vec<_> = l.trades.iter().map(|t| (t.action, t.price, t.fill)).collect();
        assert_eq!(
            fills,
            vec![
                (Buy, 10.0, Fill::Open),
                (Buy, 12.0, Fill::NoOp),
                (Sell, 15.0, Fill::Close),
                (Sell, 14.0, Fill::Open),
                (Buy, 9.0, Fill::Close),
            ]
        );
        // long 10 -> 15, short 14 -> 9
        assert_eq!(profit(&l, 20.0), 10.0);
        assert_eq!(l.executed(), 4);
        assert_eq!(l.position, Position::Flat);
    }

    #[test]
    fn long_only_ignores_opening_sells() {
        use Action::*;
        assert_eq!(replay(&[Sell, Hold], &[40.0, 30.0], true), 0.0);
        assert_eq!(replay(&[Buy, Sell, Sell], &[10.0, 13.0, 11.0], true), 3.0);
    }

    #[test]
    fn always_hold_is_empty() {
        let prices: Vec<f64> = (0..50).map(|i| 10.0 + i as f64).collect();
        let ev = evaluate_with(&mut env(&prices), false, |_| Action::Hold).unwrap();
        assert!(ev.ledger.trades.is_empty());
        assert_eq!(ev.profit(), 0.0);
        assert_eq!(ev.decisions.len(), 50 - 30 - 1);
    }

    #[test]
    fn always_buy_opens_once() {
        let prices: Vec<f64> = (0..50).map(|i| i as f64 * 2.0).collect();
        let ev = evaluate_with(&mut env(&prices), false, |_| Action::Buy).unwrap();
        assert_eq!(ev.ledger.trades[0].fill, Fill::Open);
        assert_eq!(ev.ledger.trades[0].date, day(30));
        assert_eq!(ev.ledger.executed(), 1);
        assert_eq!(ev.profit(), 98.0 - 60.0);
    }

    #[test]
    fn short_window_rejected() {
        let w = window(&[1.0; 20]);
        assert!(MarketEnv::new(w, EnvConfig::default()).is_err());
    }

    fn report(ticker: &str, kind: AgentKind, community: bool, p: f64) -> ExperimentReport {
        let mut ledger = TradeLedger::new(false);
        ledger.realized = p;
        ExperimentReport {
            ticker: ticker.into(),
            kind,
            community,
            train_window: (day(0), day(1)),
            test_window: (day(2), day(3)),
            curves: vec![],
            evaluation: Evaluation {
                ledger,
                decisions: vec![],
                final_price: 0.0,
            },
            random_baseline: None,
        }
    }

    #[test]
    fn comparison_has_six_ordered_columns() {
        let mut reports = Vec::new();
        for (i, k) in AgentKind::ALL.iter().enumerate().rev() {
            reports.push(report("GARAN", *k, true, 10.0 * i as f64 + 5.0));
            reports.push(report("GARAN", *k, false, 10.0 * i as f64));
        }
        let t = compare_agents(&reports);
        assert_eq!(t.columns, ["DQN", "CA-DQN", "DDQN", "CA-DDQN", "DDDQN", "CA-DDDQN"]);
        assert_eq!(t.best(0), Some(5));
        assert!(t.to_text().contains("*25.00"));
        assert_eq!(
            t.to_csv(),
            "ticker,DQN,CA-DQN,DDQN,CA-DDQN,DDDQN,CA-DDDQN,best\nGARAN,0.0000,5.0000,10.0000,15.0000,20.0000,25.0000,CA-DDDQN\n"
        );
        reports.reverse();
        assert_eq!(compare_agents(&reports), t);
    }

    #[test]
    fn empty_report_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        emit_curves(&report("X", AgentKind::Dqn, false, 0.0), dir.path()).unwrap();
        let reward = std::fs::read_to_string(dir.path().join("reward.csv")).unwrap();
        assert_eq!(reward, "epoch,total_reward\n");
        assert_eq!(
            std::fs::read_to_string(dir.path().join("loss.csv")).unwrap(),
            "epoch,mean_loss\n"
        );
        assert!(dir.path().join("overlay.svg").exists());
    }

    #[test]
    fn loss_blank_without_updates() {
        let curves = [
            EpochStats {
                epoch: 1,
                total_reward: 1.5,
                mean_loss: None,
                steps: 3,
            },
            EpochStats {
                epoch: 2,
                total_reward: -2.0,
                mean_loss: Some(0.25),
                steps: 3,
            },
        ];
        assert_eq!(loss_csv(&curves), "epoch,mean_loss\n1,\n2,0.25\n");
        assert_eq!(reward_csv(&curves), "epoch,total_reward\n1,1.5\n2,-2\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curves.csv");
        std::fs::write(&p, curves_csv(&curves)).unwrap();
        assert_eq!(read_curves(&p).unwrap(), curves);
    }

    fn arb_actions() -> impl Strategy<Value = Vec<(Action, f64)>> {
        prop::collection::vec((0usize..3, 0.0f64..100.0), 1..60).prop_map(|v| {
            v.into_iter()
                .map(|(a, p)| (Action::from_index(a).unwrap(), p))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn swapping_buy_and_sell_negates_profit(steps in arb_actions(), last in 0.0f64..100.0) {
            let swap = |a: Action| match a {
                Action::Buy => Action::Sell,
                Action::Sell => Action::Buy,
                Action::Hold => Action::Hold,
            };
            let mut a = TradeLedger::new(false);
            let mut b = TradeLedger::new(false);
            for (i, &(act, p)) in steps.iter().enumerate() {
                a.record(day(i as u64), act, p);
                b.record(day(i as u64), swap(act), p);
            }
            prop_assert_eq!(profit(&a, last), -profit(&b, last));
        }

        #[test]
        fn hold_only_is_zero(prices in prop::collection::vec(0.0f64..100.0, 1..40)) {
            let acts = vec![Action::Hold; prices.len()];
            prop_assert_eq!(replay(&acts, &prices, false), 0.0);
        }

        #[test]
        fn single_round_trip_is_exit_minus_entry(entry in 0.0f64..100.0, exit in 0.0f64..100.0) {
            prop_assert_eq!(replay(&[Action::Buy, Action::Sell], &[entry, exit], false), exit - entry);
        }
    }
}
