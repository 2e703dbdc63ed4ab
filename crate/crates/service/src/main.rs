use clap::Parser;
use fulfil_lm::cli::init_tracing;
use fulfil_service::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    init_tracing();
    run(Cli::parse())
}
