use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use kgtrader::agent::AgentKind;
use kgtrader::config::{CaMode, RunConfig};
use kgtrader::fixture::{write_demo, DemoSpec};
use kgtrader::pipeline;

/// Community-aware sentiment trading pipeline.
#[derive(Debug, Parser)]
#[command(name = "kgtrader", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restrict to these tickers (repeatable).
    #[arg(long = "ticker", global = true)]
    tickers: Vec<String>,
    /// Restrict to these agent kinds: DQN, DDQN, DDDQN (repeatable).
    #[arg(long = "agent", global = true)]
    agents: Vec<AgentKind>,
    /// Only community-aware variants.
    #[arg(long, global = true, conflicts_with = "no_ca")]
    ca: bool,
    /// Only variants with sentiment zeroed.
    #[arg(long, global = true)]
    no_ca: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate inputs and write normalized price series.
    Ingest,
    /// Score community members by in-community followers.
    Community,
    /// Expand each company into main and related keywords.
    Expand,
    /// Compute the daily sentiment signal table.
    Signals,
    /// Train agents and write checkpoints and curves.
    Train,
    /// Evaluate trained agents on the test window and compare them.
    Backtest,
    /// Run every stage in order.
    All,
    /// Write the synthetic demo dataset.
    Fixture {
        /// Target directory.
        dir: PathBuf,
        #[arg(long, default_value_t = DemoSpec::default().days)]
        days: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, kgtrader::Error> {
    let path = cli.config.as_ref().ok_or_else(|| kgtrader::Error::Config {
        key: "--config".into(),
        message: "a config file is required for this command".into(),
    })?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.select_tickers(&cli.tickers)?;
    if !cli.agents.is_empty() {
        cfg.run.agents = cli.agents.clone();
    }
    if cli.ca {
        cfg.run.community_aware = CaMode::Only;
    } else if cli.no_ca {
        cfg.run.community_aware = CaMode::Off;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Command::Fixture { dir, days } = &cli.command {
        let spec = DemoSpec {
            days: *days,
            seed: cli.seed.unwrap_or(DemoSpec::default().seed),
            ..DemoSpec::default()
        };
        let n = write_demo(dir, spec).with_context(|| format!("writing fixture to {}", dir.display()))?;
        println!("wrote {n} tweets and {} trading days to {}", spec.days, dir.display());
        return Ok(());
    }
    let cfg = load_config(cli)?;
    let output = match cli.command {
        Command::Ingest => pipeline::cmd_ingest(&cfg)?,
        Command::Community => pipeline::cmd_community(&cfg)?,
        Command::Expand => pipeline::cmd_expand(&cfg)?,
        Command::Signals => pipeline::cmd_signals(&cfg)?,
        Command::Train => pipeline::cmd_train(&cfg)?,
        Command::Backtest => pipeline::cmd_backtest(&cfg)?.to_text(),
        Command::All => pipeline::run_all(&cfg)?.to_text(),
        Command::Fixture { .. } => unreachable!("handled above"),
    };
    print!("{output}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .downcast_ref::<kgtrader::Error>()
                .is_some_and(kgtrader::Error::is_validation);
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
