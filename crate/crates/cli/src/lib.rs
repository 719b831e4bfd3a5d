//! Command-line front end: parses an experiment config, runs one of the
//! `basis`, `kernel-check`, `clt` or `conditions` commands, and writes JSON
//! reports, CSV tables, plot data and a run manifest.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | all checks passed |
//! | 1 | I/O or other runtime failure |
//! | 2 | config error, too few samples, or unmet `n` precondition |
//! | 3 | Gram residual above threshold or degree cap exceeded |
//! | 4 | kernel fit failure |
//! | 5 | normality or covariance condition failure |
//! | 6 | statistic routes disagree |

pub mod commands;
pub mod config;
pub mod output;
pub mod registry;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RunConfig};
use output::{OutputDir, RunManifest};

pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const BASIS: i32 = 3;
    pub const FIT: i32 = 4;
    pub const STATISTICS: i32 = 5;
    pub const AUDIT: i32 = 6;
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<holozero::Error> for Failure {
    fn from(e: holozero::Error) -> Self {
        use holozero::Error as E;
        let code = match e {
            E::Config(_)
            | E::InsufficientN { .. }
            | E::InvalidModel(_)
            | E::InvalidForm(_)
            | E::Domain { .. }
            | E::DegenerateCurvature { .. } => exit::CONFIG,
            E::DegreeCap { .. } | E::IllConditioned { .. } => exit::BASIS,
            _ => exit::IO,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(exit::IO, format!("I/O error: {e}"))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(exit::CONFIG, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "holozero", version, about = "Zero statistics of Gaussian random holomorphic sections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "HOLOZERO_WORKERS")]
    pub workers: Option<usize>,
    /// Leave the manifest timestamp empty.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build bases along the n ladder and report Gram residuals.
    Basis {
        #[command(flatten)]
        common: Common,
        /// Write the coefficient matrices as CSV.
        #[arg(long)]
        dump_coeffs: bool,
    },
    /// Near-diagonal fit and off-diagonal decay of the normalized kernel.
    KernelCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Linear statistics of the zero divisors and their normality.
    Clt {
        #[command(flatten)]
        common: Common,
        /// Write the drawn coefficient vectors as CSV.
        #[arg(long)]
        dump_coeffs: bool,
        /// Write every zero divisor as CSV.
        #[arg(long)]
        dump_divisors: bool,
    },
    /// Covariance conditions along the n ladder.
    Conditions {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Basis { common, .. }
            | Command::KernelCheck { common }
            | Command::Clt { common, .. }
            | Command::Conditions { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Basis { .. } => "basis",
            Command::KernelCheck { .. } => "kernel-check",
            Command::Clt { .. } => "clt",
            Command::Conditions { .. } => "conditions",
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(()) => exit::OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Parses `args` (program name first) and runs it.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            }
        }
    }
}

fn execute(command: &Command) -> Result<(), Failure> {
    let common = command.common();
    let text = config::load(&common.config)
        .map_err(|e| Failure::new(exit::IO, format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    let workers = match common.workers {
        Some(0) => return Err(Failure::new(exit::CONFIG, "--workers must be positive")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::new(exit::IO, format!("cannot start worker pool: {e}")))?;
    let mut out = OutputDir::create(&common.out)?;
    let timestamp_unix = if common.no_timestamp {
        None
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    };

    let start = Instant::now();
    let (result, mut durations_ms) = {
        let mut ctx = commands::Context {
            cfg: &cfg,
            out: &mut out,
            workers,
            dump_coeffs: false,
            dump_divisors: false,
            durations_ms: BTreeMap::new(),
        };
        let result = pool.install(|| match command {
            Command::Basis { dump_coeffs, .. } => {
                ctx.dump_coeffs = *dump_coeffs;
                commands::basis(&mut ctx)
            }
            Command::KernelCheck { .. } => commands::kernel_check(&mut ctx),
            Command::Clt {
                dump_coeffs,
                dump_divisors,
                ..
            } => {
                ctx.dump_coeffs = *dump_coeffs;
                ctx.dump_divisors = *dump_divisors;
                commands::clt(&mut ctx)
            }
            Command::Conditions { .. } => commands::conditions(&mut ctx),
        });
        (result, ctx.durations_ms)
    };
    durations_ms.insert("total".into(), start.elapsed().as_millis() as u64);

    let mut outputs: Vec<String> = out.written().iter().map(|p| p.display().to_string()).collect();
    outputs.push(out.root().join("manifest.json").display().to_string());
    let manifest = RunManifest {
        command: command.name().into(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        timestamp_unix,
        config_path: common.config.display().to_string(),
        config: cfg.echo.clone(),
        outputs,
        seeds: matches!(command, Command::Clt { .. }).then_some(cfg.seed).into_iter().collect(),
        durations_ms,
        workers,
        exit_code: result.as_ref().map_or_else(|f| f.code, |_| exit::OK),
    };
    out.write_json("manifest.json", &manifest)?;
    result
}
