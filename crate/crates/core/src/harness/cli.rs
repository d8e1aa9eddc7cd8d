//! Command-line front end.
//!
//! Exit codes: `0` success, `1` failed checks or I/O errors, `2` invalid
//! configuration, `3` runtime breach (positivity, mass operator, non-finite).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{RunConfig, SweepAxis};
use crate::error::{Error, Result};

use super::sinks::{Command, ReportLine};
use super::{execute, rerender, Outcome};

pub const EXIT_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_BREACH: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "stochflock",
    version,
    about = "Stochastic compressible flocking solver and verification harness"
)]
pub struct Cli {
    /// TOML config file; defaults apply to every missing field.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `--set scheme.h=0.005`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (also `STOCHFLOCK_OUT`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// One path with every report.
    Run,
    /// Many paths: moments and energy-inequality statistics.
    Ensemble {
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Common-noise refinement study along one parameter.
    Sweep {
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// The invariant battery on small grids; exit 0 iff every check passes.
    Verify,
    /// Cucker–Smale particle reference run.
    Particles,
    /// Re-render report and summary from stored output.
    Report {
        #[arg(long)]
        from: PathBuf,
    },
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p, &cli.set)?,
        None => RunConfig::from_toml_with_overrides("", &cli.set)?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    match &cli.command {
        Sub::Ensemble { paths: Some(p) } => cfg.ensemble.paths = *p,
        Sub::Sweep { axis, values } => {
            if let Some(a) = axis {
                cfg.sweep.axis = *a;
            }
            if let Some(v) = values {
                cfg.sweep.values = v.clone();
            }
        }
        _ => {}
    }
    Ok(cfg)
}

fn print_outcome(o: &Outcome) {
    for line in &o.report {
        match line {
            ReportLine::Check(c) => {
                println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            }
            ReportLine::Verify { passed, total } => println!("{passed}/{total} checks passed"),
            _ => {}
        }
    }
    println!("outputs written to {}", o.out.dir.display());
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    if let Sub::Report { from } = &cli.command {
        let to = cli.out.clone().unwrap_or_else(|| from.clone());
        return rerender(from, &to);
    }
    let cfg = load_config(cli)?;
    let command = match cli.command {
        Sub::Run => Command::Run,
        Sub::Ensemble { .. } => Command::Ensemble,
        Sub::Sweep { .. } => Command::Sweep,
        Sub::Verify => Command::Verify,
        Sub::Particles => Command::Particles,
        Sub::Report { .. } => unreachable!("handled above"),
    };
    execute(command, &cfg, cli.threads)
}

/// Runs the parsed command line and maps the outcome to an exit code.
pub fn run(cli: &Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(o) => {
            print_outcome(&o);
            if o.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else if e.is_runtime_breach() {
                EXIT_BREACH
            } else {
                EXIT_FAILED
            })
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(&Cli::parse())
}
