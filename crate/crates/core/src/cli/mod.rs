//! The `obslab` command-line runner.

mod commands;
pub mod config;
pub mod expr;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
pub use config::{ExperimentConfig, LoadedConfig};
use output::{error_report, write_atomic, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "obslab", version, about = "Boundary-trace identification of potentials and damping in 1D")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues, Weyl bound and gap statistics.
    Eig(RunArgs),
    /// Solve the evolution problem and record the boundary trace.
    Forward(RunArgs),
    /// Observability constant on a span of low modes.
    Observability(RunArgs),
    /// Individual probe coefficients.
    Probe(RunArgs),
    /// Full field reconstruction from probe traces.
    Reconstruct(RunArgs),
    /// Reconstruction error against the data misfit over a sweep.
    Stability(RunArgs),
    /// Reduced-resolution invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Experiment file or directory of experiment files to validate.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eig(_) => "eig",
            Command::Forward(_) => "forward",
            Command::Observability(_) => "observability",
            Command::Probe(_) => "probe",
            Command::Reconstruct(_) => "reconstruct",
            Command::Stability(_) => "stability",
            Command::Selftest(_) => "selftest",
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

fn report_error(err: &Error, out: Option<&Path>) -> i32 {
    let report = error_report(err);
    let json = serde_json::to_string(&serde_json::json!({ "error": report })).unwrap_or_default();
    eprintln!("{json}");
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        let _ = write_atomic(&dir.join("error.json"), format!("{json}\n").as_bytes());
    }
    report.exit_code
}

pub fn run(cli: Cli) -> i32 {
    let name = cli.command.name();
    match cli.command {
        Command::Selftest(args) => run_selftest(args),
        Command::Eig(a) => run_experiment(name, a, commands::eig),
        Command::Forward(a) => run_experiment(name, a, commands::forward),
        Command::Observability(a) => run_experiment(name, a, commands::observability),
        Command::Probe(a) => run_experiment(name, a, commands::probe),
        Command::Reconstruct(a) => run_experiment(name, a, commands::reconstruct),
        Command::Stability(a) => run_experiment(name, a, commands::stability),
    }
}

fn run_experiment(name: &str, args: RunArgs, body: fn(&mut commands::Context) -> Result<()>) -> i32 {
    let start = Instant::now();
    let loaded = match ExperimentConfig::load(&args.config) {
        Ok(l) => l,
        Err(e) => return report_error(&e, args.out.as_deref()),
    };
    let dir = args.out.clone().unwrap_or_else(|| match &loaded.config.output.dir {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from("obslab-out").join(format!("{}-{name}", loaded.stem)),
    });
    let result = (|| -> Result<()> {
        let mut out = OutputDir::create(&dir)?;
        out.warnings.extend(loaded.config.notes()?);
        let seed = args.seed.unwrap_or(loaded.config.noise.seed);
        let mut ctx = commands::Context { config: &loaded.config, out: &mut out, seed, quiet: args.quiet };
        body(&mut ctx)?;
        let manifest = out.finish(name, &loaded.hash, seed, start.elapsed().as_secs_f64())?;
        if !args.quiet {
            for w in &manifest.warnings {
                println!("warning: {w}");
            }
            println!("wrote {} files to {}", manifest.outputs.len() + 1, dir.display());
        }
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => report_error(&e, Some(&dir)),
    }
}

fn run_selftest(args: SelftestArgs) -> i32 {
    let start = Instant::now();
    let report = match selftest::run_selftest(args.config.as_deref(), selftest::SelftestOptions::from_env()) {
        Ok(r) => r,
        Err(e) => return report_error(&e, args.out.as_deref()),
    };
    if !args.quiet {
        for c in &report.checks {
            println!("{} {:<36} {:>7.2}s  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.seconds, c.detail);
        }
    }
    if let Some(dir) = &args.out {
        let written = (|| -> Result<()> {
            let mut out = OutputDir::create(dir)?;
            out.json("selftest.json", &report)?;
            out.finish("selftest", "", args.seed.unwrap_or(0), start.elapsed().as_secs_f64())?;
            Ok(())
        })();
        if let Err(e) = written {
            return report_error(&e, Some(dir));
        }
    }
    if report.passed {
        0
    } else {
        1
    }
}
