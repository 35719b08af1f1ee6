use clap::Parser;
use otfs_sim::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
