//! `bsphere` — command-line front end for collision-kernel analysis on the
//! sphere: assembled log-Sobolev bounds and criterion verdicts (`analyze`),
//! a functional-inequality check suite (`verify`), exact spectral flows
//! (`flow`), the even-degree Legendre inequality (`legendre-check`), and
//! symmetrized kernel comparison (`compare`).
//!
//! Exit codes: 0 success (criterion pass where one is configured);
//! 2 configuration error; 3 divergent kernel or no applicable bound route;
//! 4 check failure (including a corrupted spectrum cache entry).

mod cache;
mod commands;
mod config;

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::cache::SpectrumCache;
use crate::config::JobConfig;

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration (exit 2).
    Config(String),
    /// Unusable spectrum cache entry (exit 4).
    Cache(String),
    /// Error raised by the numerical core (exit 2, 3, or 4 by class).
    Core(bsphere_core::Error),
    /// Filesystem failure while writing reports (exit 1).
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Cache(msg) => write!(f, "cache error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<bsphere_core::Error> for CliError {
    fn from(e: bsphere_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Maps an error to the documented exit code: malformed inputs are 2,
/// divergence/inapplicability is 3, failed certificates are 4.
fn exit_code_for(e: &CliError) -> u8 {
    use bsphere_core::Error as E;
    match e {
        CliError::Config(_) => 2,
        CliError::Cache(_) => 4,
        CliError::Io(_) => 1,
        CliError::Core(core) => match core {
            E::InvalidDimension(_)
            | E::InvalidInput(_)
            | E::DomainError(_)
            | E::OutOfRange(_)
            | E::DimensionTooSmall(_)
            | E::BandLimitExceeded(_)
            | E::NonPositive(_)
            | E::KernelNotSmooth(_)
            | E::NotTangent(_) => 2,
            E::DivergentIntegral(_)
            | E::QuadratureNotConverged(_)
            | E::UnboundedRatio(_)
            | E::NoRouteApplicable(_)
            | E::TruncationError(_) => 3,
            E::TailNotCertified(_)
            | E::StepTooLarge(_)
            | E::AllDegenerate(_)
            | E::PositivityLost(_) => 4,
        },
    }
}

// ---------------------------------------------------------------------------
// Output context
// ---------------------------------------------------------------------------

/// Writes a file by creating a sibling temp file and renaming it into
/// place, so concurrent readers never observe a partial report.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::other("path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Report destination: files under an output directory when one is
/// configured, stdout otherwise. Progress notes go to stderr unless
/// `--quiet`. Reports carry no timestamps, so identical configs produce
/// byte-identical output.
pub struct OutputCtx {
    out_dir: Option<PathBuf>,
    quiet: bool,
}

impl OutputCtx {
    /// Emits a JSON report as `<name>.json` in the output directory, or
    /// pretty-printed to stdout when no directory is configured.
    pub fn emit(&self, name: &str, doc: &serde_json::Value) -> Result<(), CliError> {
        let body = format!(
            "{}\n",
            serde_json::to_string_pretty(doc).expect("report serializes")
        );
        self.emit_named(&format!("{name}.json"), body.as_bytes())
    }

    /// Emits raw bytes as a named file, or to stdout without a directory.
    pub fn emit_named(&self, filename: &str, bytes: &[u8]) -> Result<(), CliError> {
        match &self.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(filename);
                write_atomic(&path, bytes)?;
                self.note(&format!("wrote {}", path.display()));
                Ok(())
            }
            None => {
                std::io::stdout().write_all(bytes)?;
                Ok(())
            }
        }
    }

    /// Prints a human-readable progress or verdict line to stderr.
    pub fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "bsphere",
    version,
    about = "Collision-kernel analysis on the sphere: log-Sobolev constants, \
             inequality verification, and exact spectral flows"
)]
struct Cli {
    /// Job configuration (JSON). Required by every command except
    /// legendre-check.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for report files; without it reports print to stdout.
    /// Overrides out_dir from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed; overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress progress notes on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute constants and the assembled lower bound for the configured
    /// kernel; apply the monotonicity criterion when one is configured
    Analyze,
    /// Run the functional-inequality check suite against the kernel
    Verify,
    /// Evolve a sampled initial datum and write the time series
    Flow,
    /// Check the even-degree Legendre inequality over a dimension range
    LegendreCheck,
    /// Bound the kernel by symmetrized-ratio comparison with the reference
    Compare,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let needs_config = !matches!(cli.command, Cmd::LegendreCheck);
    let mut cfg = match &cli.config {
        Some(path) => Some(JobConfig::load(path)?),
        None if needs_config => {
            return Err(CliError::Config(
                "this command needs --config <path>".into(),
            ));
        }
        None => None,
    };
    if let (Some(cfg), Some(seed)) = (cfg.as_mut(), cli.seed) {
        cfg.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.out_dir.clone()));
    let out = OutputCtx { out_dir, quiet: cli.quiet };
    let cache = SpectrumCache::from_env();

    match cli.command {
        Cmd::Analyze => commands::cmd_analyze(cfg.as_ref().expect("config checked"), &out, &cache),
        Cmd::Verify => commands::cmd_verify(cfg.as_ref().expect("config checked"), &out, &cache),
        Cmd::Flow => commands::cmd_flow(cfg.as_ref().expect("config checked"), &out, &cache),
        Cmd::LegendreCheck => commands::cmd_legendre(cfg.as_ref(), &out),
        Cmd::Compare => commands::cmd_compare(cfg.as_ref().expect("config checked"), &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
