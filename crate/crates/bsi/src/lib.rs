//! Std front-end for `bsi-core`: JSON run configs, the dataset CSV format,
//! atomic file output, a thread-pool executor and the `bsi` subcommands.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod executor;
pub mod io;

use std::path::{Path, PathBuf};

use bsi_core::inference::Executor as _;

pub use commands::Context;
pub use config::{Command, RunConfig};
pub use error::{CliError, Result};
pub use executor::Threads;

/// Default output directory when neither `--out` nor `output` is given.
pub const DEFAULT_OUT: &str = "bsi-out";

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Loads and validates the config, then runs one subcommand. The resolved
/// config is echoed to `config.json` next to the outputs.
pub fn execute(cmd: Command, config_path: &Path, ov: &Overrides) -> Result<Vec<PathBuf>> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    cfg.validate(cmd)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match (&ov.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => io::resolve(&base, o),
        (None, None) => PathBuf::from(DEFAULT_OUT),
    };
    let ctx = Context {
        base,
        out,
        workers: ov.workers.unwrap_or_else(|| Threads::available().workers()).max(1),
    };
    run(cmd, &cfg, &ctx)
}

/// Runs a validated config.
pub fn run(cmd: Command, cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let mut files = match cmd {
        Command::LoglikBench => commands::bench::run(cfg, ctx)?,
        Command::Study => commands::study::run(cfg, ctx)?,
        Command::Infer => commands::infer::run(cfg, ctx)?,
        Command::Select => commands::select::run(cfg, ctx)?,
        Command::Predict => commands::infer::predict(cfg, ctx)?,
        Command::Sweep => commands::sweep::run(cfg, ctx)?,
    };
    let p = ctx.path("config.json");
    io::write_atomic(&p, format!("{}\n", cfg.to_json()).as_bytes())?;
    files.push(p);
    Ok(files)
}
