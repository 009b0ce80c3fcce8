//! `nematic` command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod vtk;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::{RawConfig, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Config,
    Solver,
    Physicality,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Io => 1,
            ErrorKind::Config => 2,
            ErrorKind::Solver => 3,
            ErrorKind::Physicality => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ErrorKind, error: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind,
            error: error.into(),
        }
    }

    pub fn io(error: anyhow::Error) -> Self {
        Self::new(ErrorKind::Io, error)
    }

    pub fn config(error: nematic_core::Error) -> Self {
        Self::new(ErrorKind::Config, error)
    }

    /// Maps a library error to its exit class.
    pub fn core(error: nematic_core::Error) -> Self {
        use nematic_core::Error as E;
        let kind = match &error {
            e if e.is_physicality() => ErrorKind::Physicality,
            E::EllipticityViolated { .. }
            | E::InvalidParameter(_)
            | E::UnsupportedOrder(_)
            | E::Parse { .. }
            | E::EmptyMesh
            | E::NonTetElements { .. }
            | E::TooLarge { .. } => ErrorKind::Config,
            _ => ErrorKind::Solver,
        };
        Self::new(kind, error)
    }

    pub fn context(self, msg: String) -> Self {
        CliError {
            kind: self.kind,
            error: self.error.context(msg),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "nematic",
    version,
    about = "Q-tensor finite element solver for nematic liquid crystals"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for output files (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Run with elastic constants that fail the ellipticity check.
    #[arg(long, global = true)]
    allow_nonelliptic: bool,

    /// Single-threaded run; output is bitwise reproducible either way.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Override a configuration key, e.g. `--set domain.n=8`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the discrete problem with the configured boundary data.
    Solve,
    /// Manufactured-solution convergence study over `levels`.
    Convergence {
        /// Mesh levels, overriding the `levels` key.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Discrete inf-sup constant of the linearization over `levels`.
    Infsup {
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Singular potential along a uniaxial sweep.
    PotentialTable {
        #[arg(long, allow_negative_numbers = true)]
        s_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        s_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// List the configuration keys.
    Keys,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let cfg_err = |e: config::ConfigError| CliError::new(ErrorKind::Config, e);
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p).map_err(cfg_err)?,
        None => RawConfig::default(),
    };
    for pair in &cli.overrides {
        raw.set_pair(pair).map_err(cfg_err)?;
    }
    let mut set = |k: &str, v: String| raw.set(k, &v).map_err(cfg_err);
    match &cli.command {
        Command::Convergence { levels: Some(l) } | Command::Infsup { levels: Some(l) } => {
            let text: Vec<String> = l.iter().map(usize::to_string).collect();
            set("levels", text.join(","))?;
        }
        Command::PotentialTable {
            s_min,
            s_max,
            points,
        } => {
            if let Some(v) = s_min {
                set("sweep.s_min", v.to_string())?;
            }
            if let Some(v) = s_max {
                set("sweep.s_max", v.to_string())?;
            }
            if let Some(v) = points {
                set("sweep.points", v.to_string())?;
            }
        }
        _ => {}
    }
    RunConfig::from_raw(&raw).map_err(cfg_err)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Keys = cli.command {
        for (k, d) in config::KEYS {
            println!("{k:<24} {d}");
        }
        return Ok(());
    }
    let config = load_config(&cli)?;
    if cli.deterministic {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| CliError::new(ErrorKind::Config, e))?;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| {
        CliError::io(anyhow::Error::new(e).context(format!("cannot create {}", cli.out.display())))
    })?;
    let ctx = Run {
        config,
        out: cli.out,
        allow_nonelliptic: cli.allow_nonelliptic,
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Convergence { .. } => commands::convergence(&ctx),
        Command::Infsup { .. } => commands::infsup(&ctx),
        Command::PotentialTable { .. } => commands::potential_table(&ctx),
        Command::Keys => unreachable!(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.kind.exit_code())
        }
    }
}
