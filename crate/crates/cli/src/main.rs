use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use socialbot_cli::report;
use socialbot_cli::server::{self, TurnRequest, TurnResponse};
use socialbot_core::config::Config;
use socialbot_core::corpus::EntityIndex;
use socialbot_core::manager::TurnInput;
use socialbot_core::replay::{run_replay, ReplayFixture};
use socialbot_core::store::{read_log, MemoryStore};
use tracing_subscriber::EnvFilter;

/// Open-domain social dialogue engine.
#[derive(Parser)]
#[command(name = "socialbot", version)]
struct Cli {
    /// Override any config key, e.g. `--set sampler.rng_seed=3`. Repeatable.
    /// `CHIRPY_SECTION__KEY` environment variables apply after these.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP turn service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
    },
    /// Chat in the terminal. `:debug` toggles turn details, `:quit` leaves.
    Repl {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        session: Option<String>,
    },
    /// Run one turn against the configured store and print the reply.
    Turn {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        session: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the full JSON response instead of the bot text.
        #[arg(long)]
        json: bool,
        utterance: String,
    },
    /// Replay a scripted conversation and diff it against its expectations.
    Replay {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Use this config instead of the one the fixture names.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the replay's conversation log here as JSONL.
        #[arg(long)]
        log_out: Option<PathBuf>,
    },
    /// Engagement metrics for a conversation log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        session: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Entity index tools.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Validate entity records and write a serialized index.
    Build {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Config> {
    let mut sets = sets.to_vec();
    if let Some(seed) = seed {
        sets.push(format!("session.seed={seed}"));
    }
    Config::from_env(path, &sets).context("loading configuration")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve { config, port, host } => {
            let mut config = load_config(config.as_deref(), &cli.sets, None)?;
            if let Some(port) = port {
                config.server.port = port;
            }
            if let Some(host) = host {
                config.server.host = host;
            }
            serve(config)?;
        }
        Command::Repl { config, seed, session } => {
            let config = load_config(config.as_deref(), &cli.sets, seed)?;
            repl(&config, session)?;
        }
        Command::Turn { config, session, seed, json, utterance } => {
            let config = load_config(config.as_deref(), &cli.sets, seed)?;
            let engine = config.engine()?;
            let request = TurnRequest { session_id: session, user_utterance: utterance, config: None };
            let outcome = engine.process(&request.input())?;
            if json {
                println!("{}", serde_json::to_string(&TurnResponse::from_outcome(outcome, false))?);
            } else {
                println!("{}", outcome.bot_utterance);
            }
        }
        Command::Replay { fixture, seed, config, log_out } => {
            let fixture = ReplayFixture::load(&fixture)?;
            let config_path = config.unwrap_or_else(|| fixture.config.clone());
            let config = load_config(Some(&config_path), &cli.sets, seed)?;
            let engine = config.engine_with_store(Arc::new(MemoryStore::new()))?;
            let report = run_replay(&engine, &fixture, &Default::default())?;
            print!("{}", report::replay_text(&report));
            if let Some(path) = log_out {
                let mut file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                for entry in &report.log {
                    writeln!(file, "{}", serde_json::to_string(entry)?)?;
                }
            }
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Metrics { log, session, json } => {
            let mut entries = read_log(&log)?;
            if let Some(id) = &session {
                entries.retain(|e| &e.session_id == id);
                if entries.is_empty() {
                    bail!("no turns for session `{id}` in {}", log.display());
                }
            }
            let metrics = report::metrics_by_session(&entries);
            if json {
                println!("{}", serde_json::to_string_pretty(&metrics)?);
            } else {
                print!("{}", report::metrics_table(&metrics));
            }
        }
        Command::Index { command: IndexCommand::Build { input, out } } => {
            let index = EntityIndex::load(&input).with_context(|| format!("reading {}", input.display()))?;
            index.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} entities to {}", index.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(config: Config) -> Result<()> {
    let engine = Arc::new(config.engine()?);
    let addr: SocketAddr = format!("{}:{}", config.server.host, config.server.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", config.server.host, config.server.port))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        tracing::info!(%addr, entities = engine.world().index.len(), "listening");
        axum::serve(listener, server::router(engine))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn repl(config: &Config, session: Option<String>) -> Result<()> {
    let engine = config.engine()?;
    let session = session.unwrap_or_else(|| {
        let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
        format!("repl-{}-{}", std::process::id(), now.as_millis())
    });
    let mut debug = false;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    eprintln!("session {session}; :debug toggles details, :quit leaves");
    loop {
        write!(stdout, "you> ")?;
        stdout.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        match line.trim() {
            ":quit" | ":q" => break,
            ":debug" => {
                debug = !debug;
                println!("(debug {})", if debug { "on" } else { "off" });
                continue;
            }
            _ => {}
        }
        let input = TurnInput { session_id: session.clone(), utterance: line.trim().to_string(), ..Default::default() };
        let outcome = engine.process(&input)?;
        println!("bot> {}", outcome.bot_utterance);
        if debug {
            print!("{}", report::debug_summary(&outcome.debug));
        }
        if outcome.conversation_ended {
            println!("(conversation ended)");
            break;
        }
    }
    Ok(())
}
