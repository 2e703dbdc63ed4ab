use clap::Parser;
use fulfil_lm::cli::{init_tracing, run_eval_command, EvalCommand};

/// Judge predictions, compute accuracy metrics and render reports.
#[derive(Parser)]
#[command(name = "eval", version)]
struct Cli {
    #[command(subcommand)]
    command: EvalCommand,
}

fn main() -> anyhow::Result<()> {
    init_tracing();
    run_eval_command(&Cli::parse().command)
}
