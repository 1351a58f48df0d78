use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use adaptutor_core::config::EngineConfig;
use adaptutor_core::session::DATA_DIR_ENV;
use adaptutor_core::sim::ExperimentKind;
use adaptutor_server::cli;
use adaptutor_server::{router, AppState};

#[derive(Parser)]
#[command(name = "adaptutor", version, about = "Adaptive tutoring engine")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the session HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Item bank JSON; overrides the config's bank path.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Engine config TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for session logs; defaults to $ADAPTUTOR_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Run a simulation experiment and write its series as CSV.
    Simulate {
        /// One of cat, tracing, bandit, q.
        #[arg(long)]
        experiment: ExperimentKind,
        /// Experiment config TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV; summaries go to `<stem>_summary.csv`. Prints to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate 2PL item parameters from a response CSV.
    Calibrate {
        #[arg(long)]
        responses: PathBuf,
        /// Output JSON; prints to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the report of a session from its JSONL log.
    Report {
        #[arg(long)]
        session_log: PathBuf,
    },
}

fn write_or_print(text: &str, out: Option<&PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

async fn serve(
    host: String,
    port: u16,
    bank: Option<PathBuf>,
    config: Option<PathBuf>,
    data_dir: Option<PathBuf>,
) -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = match config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(bank) = bank {
        cfg.bank_path = Some(bank);
    }
    let data_dir = data_dir.or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from));
    let state = Arc::new(AppState::new(cfg, data_dir)?);
    let addr: SocketAddr = format!("{host}:{port}").parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    match args.command {
        Command::Serve { port, host, bank, config, data_dir } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(host, port, bank, config, data_dir))
        }
        Command::Simulate { experiment, config, seed, out } => {
            let report = cli::simulate(experiment, config.as_deref(), seed)?;
            match out {
                Some(path) => {
                    let summary = cli::write_report(&report, &path)?;
                    eprintln!("wrote {} and {}", path.display(), summary.display());
                    print!("{}", report.summaries_csv()?);
                }
                None => print!("{}", report.to_csv()?),
            }
            Ok(())
        }
        Command::Calibrate { responses, out } => {
            let fit = cli::calibrate(&responses)?;
            if !fit.converged {
                eprintln!("warning: EM stopped after {} iterations without converging", fit.iterations);
            }
            write_or_print(&cli::to_pretty_json(&fit)?, out.as_ref())
        }
        Command::Report { session_log } => write_or_print(&cli::to_pretty_json(&cli::report(&session_log)?)?, None),
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
