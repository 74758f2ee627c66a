use std::process::ExitCode;

use clap::Parser;
use maisense_cli::{run, Cli, THREADS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env_threads = std::env::var(THREADS_ENV).ok();
    match run(&cli, env_threads.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("maisense: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
