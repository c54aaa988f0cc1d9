//! `nsk-lab`: threshold, growth-rate, simulation, sweep, escape-time and
//! verification runs driven by experiment files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use commands::{execute, verify, CliError};
use config::{Command, ConfigError, ExperimentSpec};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Threshold,
    Growth,
    Simulate,
    Sweep,
    Verify,
    Escape,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Threshold => Command::Threshold,
            Cmd::Growth => Command::Growth,
            Cmd::Simulate => Command::Simulate,
            Cmd::Sweep => Command::Sweep,
            Cmd::Verify => Command::Verify,
            Cmd::Escape => Command::Escape,
        }
    }
}

/// Capillary Rayleigh-Taylor experiments.
#[derive(Debug, Parser)]
#[command(name = "nsk-lab", version)]
struct Args {
    command: Cmd,
    /// Experiment file with [slab], [profile], [run], [sweep], [escape], [output] sections.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set slab.kappa=0.05`. Repeatable.
    #[arg(short, long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (same as `--set output.dir=DIR`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Acceptance criteria to run with `verify` (default: all).
    #[arg(long = "criterion", value_parser = clap::value_parser!(u8).range(1..=10))]
    criteria: Vec<u8>,
    /// Only print the summary.
    #[arg(short, long)]
    quiet: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NSK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("NSK_THREADS must be a positive integer, got `{raw}`")))?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main_inner(args: Args) -> Result<serde_json::Value, CliError> {
    init_threads()?;
    let text = match &args.config {
        Some(p) => {
            Some(std::fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?)
        }
        None => None,
    };
    let mut overrides = args.set.clone();
    if let Some(o) = &args.out {
        overrides.push(format!("output.dir={}", toml::Value::String(o.display().to_string())));
    }
    let spec = ExperimentSpec::parse(args.command.into(), text.as_deref(), &overrides)?;
    match spec.command {
        Command::Verify => verify(&spec, &args.criteria, args.quiet),
        _ => execute(&spec, &spec.out_dir()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nsk-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
