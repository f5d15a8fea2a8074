//! Command-line front end for `duality-core`.
//!
//! Subcommands read an optional JSON config, apply flag overrides, run, and
//! write a report. Exit codes: 0 when every check passes, 1 when a check
//! fails, 2 on configuration or I/O errors.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::commands::{cmd_criteria, cmd_roof, cmd_sweep, cmd_verify, Outcome};
use crate::config::{load, parse_dims, CriteriaConfig, RoofConfig, SweepConfig, VerifyConfig};

/// Environment variable controlling log verbosity (`error` ... `trace`).
pub const LOG_ENV: &str = "DUALITY_LOG";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(duality_core::Error),
}

impl From<duality_core::Error> for CliError {
    fn from(e: duality_core::Error) -> Self {
        match e {
            duality_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Core(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "duality",
    version,
    about = "Complementarity relations, entanglement monotones and measure criteria"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the inequality and identity suites.
    Verify(CommonArgs),
    /// Tabulate complementarity quantities along a detector-overlap grid (CSV).
    Sweep(CommonArgs),
    /// Convex-roof entanglement of formation for a state file.
    Roof(RoofArgs),
    /// Check a built-in measure against the six criteria.
    Criteria(CriteriaArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sample count (verify), grid points (sweep) or samples per criterion.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Dimensions as `<d_A>x<d_B>`.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Args)]
pub struct RoofArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// State file: `{"dims": [a, b], "re": [...], "im": [...]}`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CriteriaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// One of p_vn, c_re, decoy_rho00, decoy_concave, decoy_jump.
    #[arg(long)]
    pub measure: Option<String>,
}

fn reject_flag(present: bool, flag: &str, command: &str) -> Result<(), CliError> {
    if present {
        Err(CliError::Config(format!("{flag} is not used by {command}")))
    } else {
        Ok(())
    }
}

/// Resolve configs and run one subcommand.
pub fn run(command: &Command) -> Result<(Outcome, Option<PathBuf>), CliError> {
    match command {
        Command::Verify(a) => {
            let mut cfg: VerifyConfig = load(a.config.as_deref())?;
            cfg.seed = a.seed.or(cfg.seed);
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            cfg.dims = a.dims.or(cfg.dims);
            Ok((cmd_verify(&cfg)?, a.out.clone()))
        }
        Command::Sweep(a) => {
            let mut cfg: SweepConfig = load(a.config.as_deref())?;
            cfg.seed = a.seed.or(cfg.seed);
            cfg.points = a.samples.unwrap_or(cfg.points);
            if a.samples.is_some() {
                cfg.overlaps = None;
            }
            cfg.dims = a.dims.unwrap_or(cfg.dims);
            Ok((cmd_sweep(&cfg)?, a.out.clone()))
        }
        Command::Roof(a) => {
            reject_flag(a.common.samples.is_some(), "--samples", "roof")?;
            let mut cfg: RoofConfig = load(a.common.config.as_deref())?;
            cfg.seed = a.common.seed.or(cfg.seed);
            cfg.dims = a.common.dims.or(cfg.dims);
            cfg.input = a.input.clone().or(cfg.input);
            cfg.ensemble_size = a.ensemble_size.or(cfg.ensemble_size);
            cfg.restarts = a.restarts.unwrap_or(cfg.restarts);
            Ok((cmd_roof(&cfg)?, a.common.out.clone()))
        }
        Command::Criteria(a) => {
            reject_flag(
                a.common.dims.is_some(),
                "--dims",
                "criteria (set profile.dims in the config)",
            )?;
            let mut cfg: CriteriaConfig = load(a.common.config.as_deref())?;
            cfg.seed = a.common.seed.or(cfg.seed);
            cfg.measure = a.measure.clone().or(cfg.measure);
            cfg.profile.samples = a.common.samples.unwrap_or(cfg.profile.samples);
            Ok((cmd_criteria(&cfg)?, a.common.out.clone()))
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}

/// Sidecar metadata path for CSV output: `<out>.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .try_init();
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    let result = run(&cli.command).and_then(|(outcome, out)| {
        write_output(out.as_deref(), &outcome.text)?;
        if let Some(meta) = &outcome.sidecar {
            match &out {
                Some(p) => write_output(Some(&sidecar_path(p)), meta)?,
                None => eprint!("{meta}"),
            }
        }
        Ok(outcome.pass)
    });
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("duality: {e}");
            EXIT_ERROR
        }
    }
}
