use clap::Parser;
use fulfil_lm::cli::{init_tracing, run_gen, GenArgs};

/// Generate a synthetic query dataset from task templates.
#[derive(Parser)]
#[command(name = "taskgen", version)]
struct Cli {
    #[command(flatten)]
    args: GenArgs,
}

fn main() -> anyhow::Result<()> {
    init_tracing();
    run_gen(&Cli::parse().args)
}
