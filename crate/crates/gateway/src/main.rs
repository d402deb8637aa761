//! `rapport`: chat server and offline tools.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, NaiveDate, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use rapport_core::analytics::{
    compute_distribution, distribution_csv, icebreaker_detection_rate, poq_continuation_rate,
    render_distribution, DistributionKind, Window,
};
use rapport_core::content::{load_assets, BankError, ContentBank};
use rapport_core::engine::{Engine, EngineConfig};
use rapport_core::experiment::{build_report, records_from_logs, render_csv, render_table, ExperimentConfig};
use rapport_core::log::read_log_dir;
use rapport_core::nlu::Nlu;
use rapport_core::sim::{write_logs, SimConfig, Simulation};
use rapport_core::text::NormalizedUtterance;
use rapport_core::user::{FileUserStore, UserStore};
use rapport_gateway::service::{router, spawn_reaper, AppState, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "rapport", version, about = "Rule-based socialbot server and tools")]
struct Cli {
    /// Content bank directory.
    #[arg(long, global = true, env = "RAPPORT_DATA_DIR", default_value = "data")]
    bank: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the chat API.
    Serve(ServeArgs),
    /// Content bank tools.
    Bank {
        #[command(subcommand)]
        command: BankCommand,
    },
    /// User store tools.
    User {
        #[command(subcommand)]
        command: UserCommand,
    },
    /// Show what the matchers detect in an utterance.
    Nlu {
        #[command(subcommand)]
        command: NluCommand,
    },
    /// Simulated-user runs.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Descriptive reports over conversation logs.
    Analytics {
        #[command(subcommand)]
        command: AnalyticsCommand,
    },
    /// A/B reports over conversation logs.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long, default_value = "users")]
    store: PathBuf,
    #[arg(long, default_value = "logs")]
    logs: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Seconds of inactivity before a session is closed.
    #[arg(long, default_value_t = 300)]
    idle_timeout: u64,
    /// Experiment config (TOML) deciding each user's arm.
    #[arg(long)]
    experiment: Option<PathBuf>,
    #[arg(long)]
    poq_ask_rate: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum BankCommand {
    /// Load and validate the bank, listing every violation.
    Validate,
}

#[derive(Debug, Subcommand)]
enum UserCommand {
    /// Print a stored user model as JSON.
    Show {
        user_id: String,
        #[arg(long, default_value = "users")]
        store: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum NluCommand {
    /// Print detections for one utterance as JSON.
    Match { utterance: String },
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Simulate conversations and write their logs.
    Run {
        #[arg(long, default_value_t = 5000)]
        users: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum AnalyticsCommand {
    /// One report: a distribution kind, `continuation` or `icebreaker`.
    Report {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        logs: PathBuf,
        /// Inclusive start, RFC 3339 or YYYY-MM-DD.
        #[arg(long)]
        from: Option<String>,
        /// Exclusive end, RFC 3339 or YYYY-MM-DD.
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Show only the largest rows.
        #[arg(long)]
        top: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Threshold table and correlations for a set of logs.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        logs: PathBuf,
        /// Directory for report.txt, report.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Serve(args) => serve(&cli.bank, args),
        Command::Bank {
            command: BankCommand::Validate,
        } => validate_bank(&cli.bank),
        Command::User {
            command: UserCommand::Show { user_id, store },
        } => {
            let store = FileUserStore::open(store)?;
            let model = store.load(&user_id)?;
            println!("{}", serde_json::to_string_pretty(&model)?);
            Ok(())
        }
        Command::Nlu {
            command: NluCommand::Match { utterance },
        } => nlu_match(&cli.bank, &utterance),
        Command::Sim {
            command: SimCommand::Run { users, config, out },
        } => sim_run(&cli.bank, users, config.as_deref(), &out),
        Command::Analytics {
            command:
                AnalyticsCommand::Report {
                    kind,
                    logs,
                    from,
                    to,
                    format,
                    top,
                },
        } => {
            let window = Window {
                start: from.as_deref().map(parse_instant).transpose()?,
                end: to.as_deref().map(parse_instant).transpose()?,
            };
            analytics_report(&kind, &logs, window, format, top)
        }
        Command::Experiment {
            command: ExperimentCommand::Run { config, logs, out },
        } => experiment_run(config.as_deref(), &logs, out.as_deref()),
    }
}

fn load_bank(dir: &Path) -> Result<Arc<ContentBank>> {
    let bank = load_assets(dir).with_context(|| format!("loading content bank from {}", dir.display()))?;
    Ok(Arc::new(bank))
}

fn read_toml(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn serve(bank_dir: &Path, args: ServeArgs) -> Result<()> {
    let bank = load_bank(bank_dir)?;
    let experiment = match &args.experiment {
        Some(path) => ExperimentConfig::from_toml(&read_toml(path)?)?,
        None => ExperimentConfig::default(),
    };
    let mut engine_config = EngineConfig::default();
    if let Some(rate) = args.poq_ask_rate {
        if !(0.0..=1.0).contains(&rate) {
            bail!("--poq-ask-rate must be in [0, 1]");
        }
        engine_config.poq_ask_rate = rate;
    }
    let store: Arc<dyn UserStore> = Arc::new(FileUserStore::open(&args.store)?);
    let config = ServiceConfig {
        idle_timeout: Duration::from_secs(args.idle_timeout),
        log_dir: Some(args.logs.clone()),
        experiment,
    };
    let state = Arc::new(AppState::new(Arc::new(Engine::new(bank, engine_config)), store, config));
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .context("invalid --host/--port")?;

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let reaper = spawn_reaper(Arc::clone(&state), Duration::from_secs(15));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(%addr, logs = %args.logs.display(), "listening");
        axum::serve(listener, router(Arc::clone(&state)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        reaper.abort();
        let closed = state.close_all();
        tracing::info!(closed, "shut down");
        Ok(())
    })
}

fn validate_bank(dir: &Path) -> Result<()> {
    match load_assets(dir) {
        Ok(bank) => {
            println!(
                "ok: {} topics, {} hobbies, {} opinion questions, {} intro steps",
                bank.registry.len(),
                bank.gazetteer.len(),
                bank.poq_bank.len(),
                bank.intro_script.steps.len()
            );
            Ok(())
        }
        Err(BankError::Validation(report)) => {
            for v in &report.violations {
                println!("{v}");
            }
            bail!("{} violation(s)", report.len())
        }
        Err(err) => Err(err.into()),
    }
}

fn nlu_match(bank_dir: &Path, utterance: &str) -> Result<()> {
    let nlu = Nlu::new(load_bank(bank_dir)?);
    let utt = NormalizedUtterance::new(utterance);
    let out = serde_json::json!({
        "normalized": utt.text(),
        "hobbies": nlu.match_hobbies(&utt),
        "topics": nlu.detect_topics(&utt),
        "topic_request": nlu.resolve_topic_request(&utt),
        "opinion": nlu.detect_opinion(&utt, 0),
        "name": nlu.extract_name(&utt),
        "age": nlu.detect_age_signal(&utt),
        "occupation": nlu.detect_occupation(&utt),
        "travel": nlu.extract_travel(&utt),
        "affirmation": nlu.detect_affirmation(&utt),
        "rejection": nlu.is_rejection(&utt),
        "closing": nlu.is_closing(&utt),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn sim_run(bank_dir: &Path, users: usize, config: Option<&Path>, out: &Path) -> Result<()> {
    let config = match config {
        Some(path) => SimConfig::from_toml(&read_toml(path)?)?,
        None => SimConfig::default(),
    };
    let sim = Simulation::new(load_bank(bank_dir)?, config)?;
    let conversations = sim.run(users);
    let written = write_logs(&conversations, out).with_context(|| format!("writing logs to {}", out.display()))?;
    let rated = conversations.iter().filter(|c| c.rating.is_some()).count();
    let mean_len = conversations.iter().map(|c| c.exchanges as f64).sum::<f64>() / users.max(1) as f64;
    println!(
        "{written} conversation logs written to {} ({rated} rated, mean length {mean_len:.2} exchanges)",
        out.display()
    );
    Ok(())
}

fn parse_instant(s: &str) -> Result<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .with_context(|| format!("{s:?} is neither RFC 3339 nor YYYY-MM-DD"))?;
    Ok(date.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc())
}

fn analytics_report(kind: &str, logs: &Path, window: Window, format: Format, top: Option<usize>) -> Result<()> {
    let records = read_log_dir(logs)?;
    match kind {
        "continuation" => {
            let stats = poq_continuation_rate(&records, window);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
                Format::Csv => println!(
                    "asked,continued,rate\n{},{},{}",
                    stats.asked,
                    stats.continued,
                    stats.rate.map(|r| r.to_string()).unwrap_or_default()
                ),
                Format::Text => match stats.rate {
                    Some(rate) => println!("{} of {} questions continued ({rate:.4})", stats.continued, stats.asked),
                    None => println!("no opinion questions asked in window"),
                },
            }
        }
        "icebreaker" => {
            let stats = icebreaker_detection_rate(&records);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
                Format::Csv => {
                    println!("topic,count");
                    for row in &stats.rows {
                        println!("{},{}", row.key, row.count);
                    }
                }
                Format::Text => {
                    println!(
                        "{} of {} ice-breaker responses named a topic ({:.4})",
                        stats.with_topic, stats.responses, stats.rate
                    );
                    for row in &stats.rows {
                        println!("  {:<24} {}", row.key, row.count);
                    }
                }
            }
        }
        other => {
            let kind: DistributionKind = other.parse()?;
            let report = compute_distribution(&records, kind, window);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
                Format::Csv => print!("{}", distribution_csv(&report)),
                Format::Text => print!("{}", render_distribution(&report, top)),
            }
        }
    }
    Ok(())
}

fn experiment_run(config: Option<&Path>, logs: &Path, out: Option<&Path>) -> Result<()> {
    let config = match config {
        Some(path) => ExperimentConfig::from_toml(&read_toml(path)?)?,
        None => ExperimentConfig::default(),
    };
    let records = records_from_logs(&read_log_dir(logs)?);
    let report = build_report(&records, &config)?;
    let table = render_table(&report);
    print!("{table}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.txt"), &table)?;
        fs::write(dir.join("report.csv"), render_csv(&report))?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}
