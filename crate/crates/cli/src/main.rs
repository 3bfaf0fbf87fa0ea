mod args;
mod commands;
mod config;
mod digest;
mod error;

use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapKind;
use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use config::{Config, Layered};
use error::CliError;

fn main() -> ExitCode {
    let version: &'static str =
        Box::leak(format!("{} (format version {})", detkit::VERSION, detkit::FORMAT_VERSION).into_boxed_str());
    let parsed = Cli::command()
        .version(version)
        .try_get_matches_from(std::env::args_os())
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| detkit::Error::Invariant(format!("thread pool: {e}")))?;
    }
    let seed = cfg.seed;
    match cli.command {
        Command::Plan(a) => {
            let mut a = a.over(cfg.plan);
            a.seed = a.seed.or(seed);
            commands::plan(a)
        }
        Command::Composite(a) => {
            let mut a = a.over(cfg.composite);
            a.seed = a.seed.or(seed);
            commands::composite(a)
        }
        Command::Maskprop(a) => commands::maskprop(a.over(cfg.maskprop)),
        Command::Maskrefine(a) => commands::maskrefine(a.over(cfg.maskrefine)),
        Command::Evaluate(a) => commands::evaluate(a.over(cfg.evaluate), seed),
        Command::Fuse(a) => commands::fuse(a.over(cfg.fuse)),
        Command::Pool(a) => commands::pool(a.over(cfg.pool)),
        Command::Pipeline => pipeline(cfg),
    }
}

/// plan, composite and evaluate, each from its config table.
fn pipeline(mut cfg: Config) -> Result<(), CliError> {
    if cfg.path.is_none() {
        return Err(CliError::Usage("pipeline needs --config".into()));
    }
    cfg.plan.seed = cfg.plan.seed.or(cfg.seed);
    cfg.composite.seed = cfg.composite.seed.or(cfg.seed);
    // every input must exist before anything is written
    let inputs: [(&str, Option<&Path>); 6] = [
        ("plan.manifest", cfg.plan.manifest.as_deref()),
        ("composite.sources", cfg.composite.sources.as_deref()),
        ("composite.masks", cfg.composite.masks.as_deref()),
        ("composite.backgrounds", cfg.composite.backgrounds.as_deref()),
        ("evaluate.gt", cfg.evaluate.gt.as_deref()),
        ("evaluate.det", cfg.evaluate.det.as_deref()),
    ];
    for (key, p) in inputs {
        if let Some(p) = p {
            std::fs::metadata(p).map_err(|e| detkit::Error::io(p, e))?;
        } else if !matches!(key, "composite.masks") {
            return Err(CliError::Usage(format!("pipeline needs `{key}` in the config file")));
        }
    }
    log::info!("pipeline: plan");
    commands::plan(cfg.plan)?;
    log::info!("pipeline: composite");
    commands::composite(cfg.composite)?;
    log::info!("pipeline: evaluate");
    commands::evaluate(cfg.evaluate, cfg.seed)
}
