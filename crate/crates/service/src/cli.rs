use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fulfil_core::Hosts;
use fulfil_lm::cli::{run_eval_command, run_gen, BackendArgs, EvalCommand, GenArgs};
use tracing::info;

use crate::{app, cors_layer, AppState, SessionStore};

/// Fulfillment planning copilot.
#[derive(Debug, Parser)]
#[command(name = "fulfil", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Judge predictions and build reports.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Generate a synthetic query dataset.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "data/reference")]
    pub instance: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for per-session JSONL logs; sessions stay in memory only when absent.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Origin allowed by CORS; any origin when absent.
    #[arg(long)]
    pub ui_origin: Option<String>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve(args) => serve(args),
        Command::Eval(cmd) => run_eval_command(&cmd),
        Command::Gen(args) => run_gen(&args),
    }
}

pub fn build_state(args: &ServeArgs) -> anyhow::Result<AppState> {
    let hosts = Hosts::load(&args.instance)?;
    let router = args.backend.router()?;
    let sessions = match &args.log_dir {
        Some(dir) => SessionStore::persistent(dir)?,
        None => SessionStore::in_memory(),
    };
    Ok(AppState::new(router, hosts, sessions))
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let state = Arc::new(build_state(&args)?);
    let router = app(state.clone(), cors_layer(args.ui_origin.as_deref())?);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        info!(
            addr = %listener.local_addr()?,
            instance = state.instance_name(),
            backend = state.router().backend().kind(),
            "serving"
        );
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
