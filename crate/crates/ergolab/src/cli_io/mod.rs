//! Command-line front end: configuration files, subcommand dispatch, fixed-format outputs
//! and the run manifest.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a module reports an
//! error, 2 for usage and configuration errors. Errors are printed to stderr as one JSON
//! object.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand as ClapSubcommand};
use serde_json::json;

use crate::error::LabError;

pub use commands::{lint, run, LintReport, RunOutcome, Subcommand};
pub use config::{parse_config, parse_config_str, LabConfig};
pub use output::{fmt17, sha256_hex, CheckResult, Csv, OutputSet, RunManifest, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "ERGOLAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ergolab", version, about = "Waves on stationary spacetimes with ergoregions")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Outputs go to <out-dir>/<subcommand>/.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "ergolab-out")]
    pub out_dir: PathBuf,
    /// Worker threads (overrides run.threads).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Random seed (overrides run.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, ClapSubcommand)]
pub enum Command {
    /// Evolve azimuthal modes and record energy diagnostics.
    Simulate,
    /// Build the negative-energy wave packet.
    MakeData,
    /// Split a time series into frequency bands.
    FreqAnalyze,
    /// Build the Carleman weight and certify its bulk coefficient.
    CarlemanCertify,
    /// Run the randomized Hardy inequality suites.
    HardyCheck {
        /// Only this dimension (overrides hardy.dims).
        #[arg(long)]
        dim: Option<usize>,
        /// Only this exponent (overrides hardy.exponents).
        #[arg(long)]
        a: Option<f64>,
        /// Functions per suite (overrides hardy.count).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Check metric identities on every model.
    GeometryLint,
    /// Print the configuration with all defaults filled in.
    PrintConfig,
}

impl Command {
    fn subcommand(&self) -> Option<Subcommand> {
        Some(match self {
            Command::Simulate => Subcommand::Simulate,
            Command::MakeData => Subcommand::MakeData,
            Command::FreqAnalyze => Subcommand::FreqAnalyze,
            Command::CarlemanCertify => Subcommand::CarlemanCertify,
            Command::HardyCheck { .. } => Subcommand::HardyCheck,
            Command::GeometryLint => Subcommand::GeometryLint,
            Command::PrintConfig => return None,
        })
    }
}

fn error_kind(e: &LabError) -> &'static str {
    match e {
        LabError::Domain(_) => "domain",
        LabError::Signature(_) => "signature",
        LabError::Unsupported(_) => "unsupported",
        LabError::Construction(_) => "construction",
        LabError::Precondition(_) => "precondition",
        LabError::Numerical { .. } => "numerical",
        LabError::Parameter(_) => "parameter",
        LabError::Config { .. } => "config",
        LabError::Io(_) => "io",
    }
}

/// Exit code for an error: configuration problems are usage errors.
pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config { .. } => EXIT_USAGE,
        _ => EXIT_CHECK_FAILED,
    }
}

/// Machine-readable description of an error.
pub fn error_json(e: &LabError) -> serde_json::Value {
    let key = match e {
        LabError::Config { key, .. } => Some(key.clone()),
        _ => None,
    };
    json!({"status": "error", "exit_code": exit_code(e), "kind": error_kind(e), "key": key, "message": e.to_string()})
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let fail = |e: LabError| {
        eprintln!("{}", error_json(&e));
        exit_code(&e)
    };
    let mut config = match &cli.config {
        Some(p) => match parse_config(p) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None if matches!(cli.command, Command::PrintConfig) => LabConfig::default(),
        None => return fail(LabError::Config { key: "--config".into(), msg: "a configuration file is required".into() }),
    };
    if let Some(s) = cli.seed {
        config.run.seed = s;
    }
    if let Some(t) = cli.threads {
        config.run.threads = t;
    }
    if let Command::HardyCheck { dim, a, count } = &cli.command {
        if let Some(d) = dim {
            config.hardy.dims = vec![*d];
        }
        if let Some(a) = a {
            config.hardy.exponents = vec![*a];
        }
        if let Some(c) = count {
            config.hardy.count = *c;
        }
        if let Err(e) = config.validate() {
            return fail(e);
        }
    }
    let Some(sub) = cli.command.subcommand() else {
        print!("{}", config.to_toml());
        return EXIT_OK;
    };
    match run(sub, &config, &cli.out_dir) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            let failed: Vec<&str> = m.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            println!(
                "{}",
                json!({"status": if m.passed { "ok" } else { "check_failed" }, "subcommand": m.subcommand,
                       "dir": outcome.dir, "failed_checks": failed})
            );
            if m.passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => fail(e),
    }
}
