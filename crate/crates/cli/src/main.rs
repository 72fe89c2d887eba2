//! `vdwlab`: runs scenario files and the built-in acceptance suite.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vdwlab_core::acceptance::run_all;
use vdwlab_core::Exec;

#[derive(Parser)]
#[command(name = "vdwlab", version, about = "van der Waals numerical lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a TOML configuration file.
    Run {
        config: PathBuf,
        /// Scenarios run concurrently on this many worker threads.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        /// Seed for Lanczos start vectors and random sampling.
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, default_value = "vdwlab-out")]
        out: PathBuf,
    },
    /// Run the acceptance suite and print one PASS/FAIL line per criterion.
    Verify {
        /// Also write the outcomes as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, jobs, seed, out } => {
            let (scenarios, bytes) = match config::parse_config(&config) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let opts = run::RunOptions { out_dir: out, seed, jobs: jobs as usize };
            match run::run_scenarios(&scenarios, &bytes, &config.display().to_string(), &opts) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::FAILURE,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Verify { json } => {
            let outcomes = run_all(Exec::default(), |o| println!("{}", o.line()));
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            if let Some(path) = json {
                let doc = serde_json::json!({
                    "schema_version": run::SCHEMA_VERSION,
                    "version": env!("CARGO_PKG_VERSION"),
                    "criteria": outcomes,
                });
                if let Err(e) = std::fs::write(&path, serde_json::to_vec_pretty(&doc).expect("serializable")) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
