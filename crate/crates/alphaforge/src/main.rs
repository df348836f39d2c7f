//! Command-line entry point for the alpha mining pipeline.
//!
//! Exit codes: 0 success, 1 operational error (I/O, config, network),
//! 2 validation rejection (bad expression, pool rejection). Diagnostics go to
//! stderr; results go to stdout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alphaforge::bench::{bench_eval, to_markdown};
use alphaforge::config::RunConfig;
use alphaforge::data::{forward_returns, generate_synthetic, load_csv, LabelMatrix, Panel};
use alphaforge::decompiler::{
    load_knowledge, mining_loop, ChatClient, HashedBowEmbedder, HttpChatClient, MiningConfig,
    ScriptedClient,
};
use alphaforge::dsl::{parse, print_expr, Expr};
use alphaforge::engine::{alpha_to_csv, eval_batch, eval_streaming};
use alphaforge::error::{Error, Result};
use alphaforge::gp::evolve;
use alphaforge::metrics::{ic_series, ic_summary, quantile_backtest, IcKind, DEFAULT_MIN_OBS};
use alphaforge::pool::{
    record_id, AlphaPool, InsertOutcome, RecordMetrics, DEFAULT_CORR_CAP, DEFAULT_N_PLANES,
};
use alphaforge::semantics::validate;

#[derive(Parser)]
#[command(name = "alphaforge", version, about = "Formulaic alpha mining pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Panel CSV (overrides the config's `data`).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an expression against the grammar, unit, and semantic rules.
    Validate {
        expression: String,
    },
    /// Evaluate an expression over a panel and write the alpha matrix CSV.
    Eval {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        expr: String,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate bar-by-bar through the streaming engine.
        #[arg(long)]
        streaming: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run the quantile long-short backtest for an expression.
    Backtest {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        expr: String,
        /// Also write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long)]
        quantiles: Option<usize>,
        #[arg(long)]
        cost_rate: Option<f64>,
    },
    /// Run the genetic-programming search.
    Search {
        #[command(flatten)]
        common: CommonOpts,
        /// Seed expressions, one per line.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Result JSON path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Hall-of-fame JSONL path, suitable as the next run's --seeds.
        #[arg(long)]
        hof: Option<PathBuf>,
    },
    /// Alpha pool operations against a store directory.
    Pool {
        #[command(subcommand)]
        op: PoolOp,
    },
    /// Run the LLM mining loop for a trading idea.
    Mine {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        idea: String,
        /// Scripted transcript JSON (overrides the config's `llm.transcript`).
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        target_valid: Option<usize>,
        #[arg(long)]
        max_rounds: Option<usize>,
    },
    /// Generate a synthetic panel CSV.
    Synth {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark batch and streaming evaluation.
    Bench {
        #[arg(long, default_value = "ts_mean(close, 20)")]
        expr: String,
        #[arg(long, default_value_t = 1000)]
        dates: usize,
        #[arg(long, default_value_t = 200)]
        instruments: usize,
        /// Comma-separated thread counts.
        #[arg(long, default_value = "1,2,4", value_delimiter = ',')]
        threads: Vec<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PoolOp {
    /// Insert an expression; creates the store on first use.
    Add {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        expr: String,
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        description: String,
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
    },
    /// Report the maximum absolute correlation against the store.
    Check {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        expr: String,
    },
    /// Leave-in marginal IC contribution of an expression to the pool.
    Score {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        expr: String,
        /// Composite member ids (defaults to every stored record).
        #[arg(long, value_delimiter = ',')]
        members: Vec<String>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &CommonOpts) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(data) = &common.data {
        cfg.data = Some(data.clone());
    }
    Ok(cfg)
}

fn load_panel(cfg: &RunConfig) -> Result<Panel> {
    load_csv(cfg.require_data()?, true)
}

/// Parse and fully validate; on rejection prints the report and returns None.
fn checked_expr(text: &str) -> Result<Option<Expr>> {
    let report = validate(text);
    if !report.is_valid() {
        eprintln!("{}", report.render_line());
        return Ok(None);
    }
    Ok(Some(parse(text).expect("valid implies parseable")))
}

fn labels_for(panel: &Panel, cfg: &RunConfig) -> Result<LabelMatrix> {
    forward_returns(panel, cfg.label.horizon, cfg.label.lag)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { expression } => {
            let report = validate(&expression);
            println!("{}", report.render_line());
            Ok(if report.is_valid() { 0 } else { 2 })
        }

        Command::Eval { common, expr, out, streaming, threads } => {
            let cfg = load_config(&common)?;
            let Some(parsed) = checked_expr(&expr)? else { return Ok(2) };
            let panel = load_panel(&cfg)?;
            let alpha = if streaming {
                eval_streaming(&parsed, &panel)?
            } else {
                eval_batch(&parsed, &panel, threads.max(1))?
            };
            std::fs::write(&out, alpha_to_csv(&alpha, &panel))?;
            eprintln!("wrote {}", out.display());
            Ok(0)
        }

        Command::Backtest { common, expr, report, horizon, lag, quantiles, cost_rate } => {
            let cfg = load_config(&common)?;
            let Some(parsed) = checked_expr(&expr)? else { return Ok(2) };
            let panel = load_panel(&cfg)?;
            let bt = quantile_backtest(
                &eval_batch(&parsed, &panel, 1)?,
                &panel,
                horizon.unwrap_or(cfg.label.horizon),
                lag.unwrap_or(cfg.label.lag),
                quantiles.unwrap_or(cfg.backtest.quantiles),
                cost_rate.unwrap_or(cfg.backtest.cost_rate),
            )?;
            print!("{}", bt.to_text());
            if let Some(path) = report {
                std::fs::write(&path, serde_json::to_string_pretty(&bt)?)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(0)
        }

        Command::Search { common, seeds, out, hof } => {
            let cfg = load_config(&common)?;
            let panel = load_panel(&cfg)?;
            let labels = labels_for(&panel, &cfg)?;
            let seed_exprs = match seeds {
                Some(path) => read_expressions(&path)?,
                None => Vec::new(),
            };
            let pool_exprs = match &cfg.pool {
                Some(dir) if dir.join("header.json").exists() => AlphaPool::open(dir)?
                    .records()
                    .iter()
                    .map(|r| parse(&r.expression))
                    .collect::<Result<Vec<_>>>()?,
                _ => Vec::new(),
            };
            let result = evolve(&cfg.gp, &panel, &labels, &seed_exprs, &pool_exprs)?;
            let json = serde_json::to_string_pretty(&result)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &json)?;
                    eprintln!("wrote {}", path.display());
                }
                None => println!("{json}"),
            }
            if let Some(path) = hof {
                let mut lines = String::new();
                for m in &result.hall_of_fame {
                    lines.push_str(&serde_json::to_string(m)?);
                    lines.push('\n');
                }
                std::fs::write(&path, lines)?;
                eprintln!("wrote {}", path.display());
            }
            eprintln!(
                "seed={} generations={} hall_of_fame={}",
                result.seed,
                result.generations_run,
                result.hall_of_fame.len()
            );
            Ok(0)
        }

        Command::Pool { op } => run_pool(op),

        Command::Mine { common, idea, transcript, target_valid, max_rounds } => {
            let cfg = load_config(&common)?;
            let mut mine_cfg = MiningConfig::default();
            if let Some(t) = target_valid {
                mine_cfg.target_valid = t;
            }
            if let Some(r) = max_rounds {
                mine_cfg.max_rounds = r;
            }
            let embedder = HashedBowEmbedder::default();
            let library = match &cfg.llm.knowledge {
                Some(path) => load_knowledge(path, &embedder)?,
                None => Vec::new(),
            };
            let mut client: Box<dyn ChatClient> =
                match transcript.as_ref().or(cfg.llm.transcript.as_ref()) {
                    Some(path) => Box::new(ScriptedClient::from_path(path)?),
                    None => {
                        let endpoint = cfg.llm.endpoint.as_deref().ok_or_else(|| {
                            Error::Config(
                                "mine needs either a transcript or an llm.endpoint".into(),
                            )
                        })?;
                        let model = cfg.llm.model.as_deref().unwrap_or("gpt-4");
                        Box::new(HttpChatClient::new(endpoint, model)?)
                    }
                };
            let outcome = mining_loop(&idea, client.as_mut(), &library, &mine_cfg)?;
            for a in &outcome.alphas {
                let stats = a
                    .report
                    .stats
                    .as_ref()
                    .map(|s| {
                        format!(
                            " missing_fraction={:.3} zero_variance_bar_fraction={:.3}",
                            s.missing_fraction, s.zero_variance_bar_fraction
                        )
                    })
                    .unwrap_or_default();
                println!("{}{}", a.expression, stats);
            }
            eprintln!(
                "rounds_run={} valid_alphas={}",
                outcome.rounds_run,
                outcome.alphas.len()
            );
            if let Some(err) = &outcome.client_error {
                eprintln!("warning: chat client failed: {err}");
                if outcome.alphas.is_empty() {
                    return Ok(1);
                }
            }
            Ok(0)
        }

        Command::Synth { common, out } => {
            let cfg = load_config(&common)?;
            let s = &cfg.synth;
            let (panel, _labels) = generate_synthetic(
                s.dates.unwrap_or(250),
                s.instruments.unwrap_or(50),
                s.sectors.unwrap_or(5),
                s.plant.as_deref(),
                s.plant_strength.unwrap_or(0.0),
                cfg.seed,
            )?;
            panel.write_csv(&out)?;
            let meta = serde_json::json!({
                "seed": cfg.seed,
                "fingerprint": panel.fingerprint(),
                "dates": panel.t(),
                "instruments": panel.n(),
            });
            let meta_path = out.with_extension("meta.json");
            std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
            eprintln!("wrote {} and {}", out.display(), meta_path.display());
            println!("{meta}");
            Ok(0)
        }

        Command::Bench { expr, dates, instruments, threads, seed, json } => {
            let Some(parsed) = checked_expr(&expr)? else { return Ok(2) };
            let reports = bench_eval(&parsed, dates, instruments, &threads, seed)?;
            print!("{}", to_markdown(&reports));
            if let Some(path) = json {
                let doc = serde_json::json!({ "seed": seed, "reports": reports });
                std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(0)
        }
    }
}

fn run_pool(op: PoolOp) -> Result<u8> {
    match op {
        PoolOp::Add { common, expr, name, description, tags } => {
            let cfg = load_config(&common)?;
            let (mut pool, panel) = open_or_create_pool(&cfg)?;
            let Some(parsed) = checked_expr(&expr)? else { return Ok(2) };
            let alpha = eval_batch(&parsed, &panel, 1)?;
            let labels = labels_for(&panel, &cfg)?;
            let ic = ic_summary(&ic_series(&alpha, &labels, IcKind::Pearson, DEFAULT_MIN_OBS)?)?;
            let bt = quantile_backtest(
                &alpha,
                &panel,
                cfg.label.horizon,
                cfg.label.lag,
                cfg.backtest.quantiles,
                cfg.backtest.cost_rate,
            )?;
            let metrics = RecordMetrics {
                mean_ic: ic.mean_ic,
                ic_ir: ic.ic_ir,
                sharpe: bt.sharpe,
                annual_return: bt.annual_return,
            };
            let record = pool.record_from_alpha(&name, &description, &tags, &alpha, &panel, metrics)?;
            match pool.insert(record)? {
                InsertOutcome::Accepted => {
                    println!("accepted {}", record_id(&print_expr(&parsed)));
                    Ok(0)
                }
                InsertOutcome::Rejected(reason) => {
                    eprintln!("rejected: {reason}");
                    Ok(2)
                }
            }
        }

        PoolOp::Check { common, expr } => {
            let cfg = load_config(&common)?;
            let (pool, panel) = open_pool(&cfg)?;
            let Some(parsed) = checked_expr(&expr)? else { return Ok(2) };
            let alpha = eval_batch(&parsed, &panel, 1)?;
            let (id, corr) = pool.max_correlation(alpha.values.data(), None)?;
            println!("max_correlation={corr:.6} against={id}");
            Ok(0)
        }

        PoolOp::Score { common, expr, members } => {
            let cfg = load_config(&common)?;
            let (pool, panel) = open_pool(&cfg)?;
            let Some(parsed) = checked_expr(&expr)? else { return Ok(2) };
            let alpha = eval_batch(&parsed, &panel, 1)?;
            let labels = labels_for(&panel, &cfg)?;
            let ids: Vec<String> = if members.is_empty() {
                pool.records().iter().map(|r| r.id.clone()).collect()
            } else {
                members
            };
            let score = pool.marginal_score(alpha.values.data(), &ids, &labels)?;
            println!("marginal_ic={score:.6} members={}", ids.len());
            Ok(0)
        }
    }
}

fn pool_dir(cfg: &RunConfig) -> Result<&Path> {
    cfg.pool
        .as_deref()
        .ok_or_else(|| Error::Config("no pool directory: set `pool` in the config".into()))
}

fn reference_panel(cfg: &RunConfig) -> Result<Panel> {
    let path = cfg
        .reference
        .as_deref()
        .or(cfg.data.as_deref())
        .ok_or_else(|| Error::Config("pool commands need a `reference` or `data` panel".into()))?;
    load_csv(path, true)
}

fn open_pool(cfg: &RunConfig) -> Result<(AlphaPool, Panel)> {
    let pool = AlphaPool::open(pool_dir(cfg)?)?;
    let panel = reference_panel(cfg)?;
    if panel.fingerprint() != pool.header().reference_fingerprint {
        return Err(Error::Pool("reference panel does not match the store's fingerprint".into()));
    }
    Ok((pool, panel))
}

fn open_or_create_pool(cfg: &RunConfig) -> Result<(AlphaPool, Panel)> {
    let dir = pool_dir(cfg)?;
    if dir.join("header.json").exists() {
        return open_pool(cfg);
    }
    let panel = reference_panel(cfg)?;
    let pool = AlphaPool::create(dir, &panel, DEFAULT_CORR_CAP, DEFAULT_N_PLANES, cfg.seed)?;
    Ok((pool, panel))
}

/// Reads seed expressions: one per line, `#` comments allowed. A line may
/// also be a JSON object with an `expression` field, so a `--hof` output
/// works directly as the next run's `--seeds`.
fn read_expressions(path: &Path) -> Result<Vec<Expr>> {
    std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let text = if line.starts_with('{') {
                serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("expression").and_then(|e| e.as_str()).map(String::from))
                    .ok_or_else(|| {
                        Error::Config(format!("seed line is JSON without an `expression`: {line}"))
                    })?
            } else {
                line.to_string()
            };
            parse(&text)
        })
        .collect()
}
