use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use hitstat_cli::config::LoadedConfig;
use hitstat_cli::registry::list_builtins;
use hitstat_cli::{run, worker_count, CliError, RunOptions, WORKERS_ENV};

/// Hitting-time experiments on symbolic and interval systems.
///
/// Exit codes: 0 every check passed, 2 some check failed, 3 configuration error.
#[derive(Parser, Debug)]
#[command(name = "hitstat", version)]
struct Args {
    /// Experiment to run (see --list).
    experiment: Option<String>,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; overrides [sampling] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default from HITSTAT_WORKERS, then the CPU count).
    #[arg(long)]
    workers: Option<usize>,
    /// Print the built-in systems, measures and experiments.
    #[arg(long)]
    list: bool,
}

const CONFIG_ERROR: u8 = 3;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(CONFIG_ERROR),
            };
        }
    };
    if args.list {
        print!("{}", list_builtins());
        return ExitCode::SUCCESS;
    }
    let fail = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(CONFIG_ERROR)
    };
    let Some(kind) = args.experiment else {
        return fail("missing experiment name (see --list)".into());
    };
    let Some(path) = args.config else {
        return fail("missing --config PATH".into());
    };
    let workers = match worker_count(args.workers, std::env::var(WORKERS_ENV).ok().as_deref()) {
        Ok(n) => n,
        Err(m) => return fail(m),
    };
    let cfg = match LoadedConfig::load(&path) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    match run(&kind, &cfg, &RunOptions { seed: args.seed, out: args.out, workers }) {
        Ok(s) => {
            print!("{}", s.report);
            if s.outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(CliError::Config(e)) => fail(e.to_string()),
        Err(e @ CliError::Io(_)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
