//! `modelassist`: batch completion of a model file, the HTTP service and
//! log analysis.
//!
//! Exit codes: 0 success, 1 input error (unreadable or invalid model,
//! bad logs), 2 configuration or provider error (including usage errors
//! and an unavailable port), 3 no recorded response for a prompt in mock
//! mode.

mod complete;
mod config;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use modelassist_core::analysis::{analyze, load_dataset, render_report, AnalysisOptions, GroupBy};
use modelassist_core::metrics::parse_min_sec;
use modelassist_core::recommend::{Recommender, RecommenderConfig};
use modelassist_core::session::{SessionConfig, SessionRegistry, SystemClock};

use crate::complete::{load_catalog, CompleteArgs};
use crate::config::{build_gateway, process_env, ProviderArgs};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn mock_miss(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "modelassist", version, about = "Domain-model completion assistant")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Suggest classes, attributes and associations for a model file
    Complete(CompleteArgs),
    /// Run the HTTP service
    Serve(ServeArgs),
    /// Summarize session logs
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Repetitions per prompt
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    n: u32,
    /// Directory for session logs and final models
    #[arg(long)]
    log_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pause before an automatic refresh, in milliseconds
    #[arg(long, default_value_t = 500)]
    debounce_ms: u64,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Directory of CSV logs, optionally one subdirectory per task
    logdir: PathBuf,
    /// Synonym bags applied to every task
    #[arg(long)]
    bags: Option<PathBuf>,
    /// Time limit as m:ss or seconds
    #[arg(long, default_value = "10:00", value_parser = parse_limit)]
    limit: Duration,
    #[arg(long, default_value = "mode", value_parser = parse_group_by)]
    group_by: GroupBy,
    #[arg(long)]
    json: bool,
}

fn parse_limit(text: &str) -> Result<Duration, String> {
    parse_min_sec(text).ok_or_else(|| format!("expected m:ss or seconds, got {text:?}"))
}

fn parse_group_by(text: &str) -> Result<GroupBy, String> {
    GroupBy::parse(text).ok_or_else(|| format!("expected mode or task, got {text:?}"))
}

async fn serve(args: &ServeArgs) -> Result<String, CliError> {
    let catalog = load_catalog(args.catalog.as_ref())?;
    let gateway = build_gateway(&args.provider.resolve(process_env)?)?;
    let recommender = Recommender::new(Arc::new(gateway), Arc::new(catalog), RecommenderConfig::with_repetitions(args.n));
    let defaults = SessionConfig {
        seed: args.seed,
        log_dir: args.log_dir.clone(),
        debounce: Duration::from_millis(args.debounce_ms),
        ..SessionConfig::default()
    };
    let registry = Arc::new(SessionRegistry::new(Arc::new(recommender), Arc::new(SystemClock), defaults));
    let address = format!("{}:{}", args.host, args.port);
    let listener = tokio::net::TcpListener::bind(&address)
        .await
        .map_err(|e| CliError::config(format!("cannot listen on {address}: {e}")))?;
    let local = listener.local_addr().map_err(|e| CliError::config(e.to_string()))?;
    println!("listening on http://{local}");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    modelassist_service::serve_until(listener, registry, shutdown)
        .await
        .map_err(|e| CliError::config(format!("server error: {e}")))?;
    Ok(String::new())
}

fn run_analyze(args: &AnalyzeArgs) -> Result<String, CliError> {
    let data = load_dataset(&args.logdir, args.bags.as_deref()).map_err(|e| CliError::input(e.to_string()))?;
    let options = AnalysisOptions {
        limit: args.limit,
        group_by: args.group_by,
    };
    let report = analyze(&data, &options).map_err(|e| CliError::input(e.to_string()))?;
    for notice in &report.notices {
        eprintln!("note: {notice}");
    }
    if args.json {
        Ok(serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
    } else {
        Ok(render_report(&report))
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Complete(args) => complete::run(args).await,
        Command::Serve(args) => serve(args).await,
        Command::Analyze(args) => run_analyze(args),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn command_line_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn kinds_and_limits_parse() {
        let cli = Cli::try_parse_from(["modelassist", "complete", "m.dm", "--kinds", "class,assoc", "--n", "5"]).unwrap();
        let Command::Complete(args) = cli.command else { panic!() };
        assert_eq!(args.kinds, [complete::Kind::Class, complete::Kind::Assoc]);
        assert_eq!(args.n, 5);
        assert!(Cli::try_parse_from(["modelassist", "complete", "m.dm", "--n", "0"]).is_err());
        assert!(Cli::try_parse_from(["modelassist", "complete", "m.dm", "--kinds", "verbs"]).is_err());

        let cli = Cli::try_parse_from(["modelassist", "analyze", "logs", "--limit", "7:30", "--group-by", "task"]).unwrap();
        let Command::Analyze(args) = cli.command else { panic!() };
        assert_eq!(args.limit, Duration::from_secs(450));
        assert_eq!(args.group_by, GroupBy::Task);
        assert!(Cli::try_parse_from(["modelassist", "analyze", "logs", "--limit", "7:75"]).is_err());
    }
}
