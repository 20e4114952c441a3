//! Batch runner: config in, CSV tables and a text report out.

// `!(x > 0.0)` is the NaN-rejecting form used throughout for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod registry;
pub mod report;

use std::path::{Path, PathBuf};

use hitstat::seeds::SeedStream;
use hitstat::Error;

use config::{ConfigError, LoadedConfig};
use experiments::{Ctx, RunError, KINDS};
use report::Outcome;

pub const WORKERS_ENV: &str = "HITSTAT_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

pub struct RunSummary {
    pub outcome: Outcome,
    pub report: String,
    pub dir: PathBuf,
}

/// Runs one experiment and writes `<dir>/*.csv` and `<dir>/report.txt`.
pub fn run(kind: &str, cfg: &LoadedConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    if !KINDS.contains(&kind) {
        return Err(ConfigError { path: None, line: None, message: format!("unknown experiment '{kind}' (see --list)") }.into());
    }
    if let Some(k) = &cfg.config.experiment.kind {
        if k != kind {
            return Err(cfg.error_at("kind", format!("config is for '{k}', not '{kind}'")).into());
        }
    }
    let dir = match (&opts.out, &cfg.config.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => cfg.resolve(d),
        (None, None) => return Err(cfg.error_at("dir", "no output directory: pass --out or set [output] dir").into()),
    };
    if opts.workers == 0 {
        return Err(ConfigError { path: None, line: None, message: "workers must be at least 1".into() }.into());
    }
    let built = registry::build(cfg)?;
    let seed = opts.seed.unwrap_or(cfg.config.sampling.seed);
    let ctx = Ctx { cfg, built: &built, seeds: SeedStream::new(seed, kind) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    let mut outcome = Outcome::default();
    let status = pool.install(|| experiments::run(kind, &ctx, &mut outcome));
    let mut header = vec![
        ("system".to_string(), built.name.clone()),
        ("measure".to_string(), cfg.config.measure.potential.clone()),
        ("seed".to_string(), seed.to_string()),
    ];
    match status {
        Ok(()) => header.push(("status".into(), "complete".into())),
        Err(RunError::Config(e)) => return Err(e.into()),
        Err(RunError::Lib(e @ Error::Budget { .. })) => {
            header.push(("status".into(), "partial".into()));
            outcome.check("within_budget", false, format!("stopped early, outputs are partial: {e}"));
        }
        Err(RunError::Lib(e)) => {
            header.push(("status".into(), "failed".into()));
            outcome.check("completed", false, e.to_string());
        }
    }
    let report = report::render(kind, &header, &outcome);
    write_artifacts(&dir, &outcome, &report)?;
    Ok(RunSummary { outcome, report, dir })
}

fn write_artifacts(dir: &Path, outcome: &Outcome, report: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for t in &outcome.tables {
        t.write(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.join(&t.file).display())))?;
    }
    std::fs::write(dir.join("report.txt"), report).map_err(io)
}

/// Worker count: the flag, else the environment variable, else available parallelism.
pub fn worker_count(flag: Option<usize>, env: Option<&str>) -> Result<usize, String> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got '{v}'")),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
