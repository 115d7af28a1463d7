//! `ringqed` command-line front-end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O or unreadable input
//! file, 4 numerical failure (including an UNRELIABLE beta extraction; the
//! report is still written).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ringqed_core::Error;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Invalid { .. } | Error::Argument(_) | Error::Infeasible(_) => CliError::Config(msg),
            Error::Io(_) | Error::Parse { .. } => CliError::Io(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ringqed", version, about = "Emitter-ring resonator coupling toolkit")]
struct Cli {
    /// TOML run configuration; built-in presets when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `output` from the config, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and grid integrals.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Excited-state decay curves over a list of Q values, plus a regime summary.
    Dynamics {
        /// Q values, overriding the config list.
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
    },
    /// Regime margin K0 - Gamma^2 on a log-spaced Q grid, and the critical Q.
    SweepQ,
    /// Transmission of a comb of Lorentzian resonances.
    Spectrum,
    /// Harmonic combination of partial quality factors.
    Qbudget,
    /// chi, beta, dissipated power and mode volume of a driven field map.
    AnalyzeField {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        bulk_map: Option<PathBuf>,
    },
    /// Ellipticity over the (r, z) cross-section at one angle.
    EllipticityMap {
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Emission directionality from the wavenumber spectrum of a trace.
    Directionality {
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Writes a synthetic driven field map (and optionally its bulk reference).
    Synth {
        /// Preset name, overriding the config.
        #[arg(long)]
        preset: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Dynamics { q } => {
            if let Some(q) = q {
                cfg.dynamics.q_values = q;
            }
            commands::dynamics(&cfg, &dir)
        }
        Command::SweepQ => commands::sweep_q(&cfg, &dir),
        Command::Spectrum => commands::spectrum(&cfg, &dir),
        Command::Qbudget => commands::qbudget(&cfg, &dir),
        Command::AnalyzeField { map, bulk_map } => {
            if map.is_some() {
                cfg.analyze_field.map = map;
            }
            if bulk_map.is_some() {
                cfg.analyze_field.bulk_map = bulk_map;
            }
            commands::analyze_field(&cfg, &dir)
        }
        Command::EllipticityMap { map } => {
            if map.is_some() {
                cfg.ellipticity_map.map = map;
            }
            commands::ellipticity_map(&cfg, &dir)
        }
        Command::Directionality { map } => {
            if map.is_some() {
                cfg.directionality.map = map;
            }
            commands::directionality(&cfg, &dir)
        }
        Command::Synth { preset } => {
            if let Some(p) = preset {
                cfg.synth.preset = p;
                cfg.synth.spec = None;
            }
            commands::synth(&cfg, &dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ringqed: {e}");
            ExitCode::from(e.code())
        }
    }
}
