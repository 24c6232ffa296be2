//! `bifcurrents <subcommand> --config <path> [--out <dir>] [--threads N] [--dry-run]`
//!
//! Exit status: 0 on success, 2 for invalid arguments or configuration,
//! 1 when a computation fails.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Config, ConfigError};
use run::{execute, validate, RunError, Sink, Subcommand};

const THREADS_ENV: &str = "BIFCURRENTS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "bifcurrents", version, about = "Bifurcation currents of polynomials with marked critical points")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out`, defaults to `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to BIFCURRENTS_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate the configuration and stop.
    #[arg(long)]
    dry_run: bool,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, ConfigError> {
    if let Some(n) = flag {
        return if n == 0 { Err(ConfigError::new("--threads", "must be positive")) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::new(THREADS_ENV, format!("expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn manifest(cmd: Subcommand, cfg: &Config, threads: Option<usize>, written: &[String]) -> String {
    let mut table = toml::Table::new();
    table.insert("subcommand".into(), cmd.name().into());
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    table.insert("seed".into(), toml::Value::Integer(cfg.run.seed as i64));
    if let Some(n) = threads {
        table.insert("threads".into(), toml::Value::Integer(n as i64));
    }
    table.insert("outputs".into(), written.iter().map(|s| toml::Value::from(s.as_str())).collect::<Vec<_>>().into());
    let mut wrapper = toml::Table::new();
    wrapper.insert("manifest".into(), table.into());
    format!("{}\n{}", cfg.to_toml(), toml::to_string(&wrapper).expect("manifest serializes"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let setup = || -> Result<(Config, Option<usize>), ConfigError> {
        let mut cfg = Config::load(&cli.config)?;
        if let Some(out) = &cli.out {
            cfg.run.out = Some(out.clone());
        }
        if let Some(seed) = cli.seed {
            cfg.run.seed = seed;
        }
        validate(cli.subcommand, &cfg)?;
        cfg.run.operation = Some(cli.subcommand.name().into());
        Ok((cfg, threads(cli.threads)?))
    };
    let (cfg, threads) = match setup() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.dry_run {
        println!("config ok: {} (degree {})", cli.subcommand.name(), cfg.family.degree);
        return ExitCode::SUCCESS;
    }
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let out = cfg.run.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let result = Sink::new(&out).and_then(|mut sink| {
        let summary = execute(cli.subcommand, &cfg, &mut sink)?;
        let mut files = sink.written.clone();
        files.insert(0, "manifest.txt".into());
        sink.text("manifest.txt", &manifest(cli.subcommand, &cfg, threads, &files))?;
        Ok::<_, RunError>(summary)
    });
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
