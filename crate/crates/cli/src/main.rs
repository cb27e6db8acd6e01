mod args;
mod commands;
mod data;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => commands::gen::run(a, &cli.out),
        Command::Estimate(a) => commands::estimate::run(a, &cli.out),
        Command::Analyze(a) => commands::analyze::run(a, &cli.out),
        Command::Experiment(a) => commands::experiment::run(a, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(anyhow::anyhow!("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("permlearn: {e:#}");
            ExitCode::FAILURE
        }
    }
}
