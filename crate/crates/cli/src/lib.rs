//! Command-line driver for the moving-domain damped wave toolkit.
//!
//! The binary exposes six verbs:
//!
//! * `simulate CONFIG` runs one configured simulation and writes the trace
//!   CSV, analysis reports, and plots into the configured directory;
//! * `check-constraints` certifies a (p, alpha, m, k, gamma) parameter set;
//! * `komornik TRACE` estimates the integral-inequality constant of an
//!   existing trace CSV;
//! * `fit TRACE` fits a decay envelope to an existing trace CSV;
//! * `sweep FILE` runs a parameter grid in parallel and writes summary.csv;
//! * `version` prints the package version.
//!
//! Exit codes: 0 success; 2 configuration or input errors; 3 solver
//! blow-up; 4 analysis hypothesis violations.

use std::path::PathBuf;

use pwave_core::solver::SolverError;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod plot;
pub mod report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ANALYSIS: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line (unknown verb/flag, missing argument).
    #[error("{0}")]
    Usage(String),
    /// Bad configuration file, CSV input, or parameter value.
    #[error("{0}")]
    Config(String),
    /// The integrator failed; carries the failure time.
    #[error("{0}")]
    Solver(#[from] SolverError),
    /// A certified hypothesis did not hold on the data.
    #[error("{0}")]
    Analysis(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Solver(e) => match e {
                SolverError::Blowup { .. } | SolverError::NewtonDiverged { .. } => EXIT_SOLVER,
                _ => EXIT_CONFIG,
            },
            CliError::Analysis(_) => EXIT_ANALYSIS,
        }
    }
}

const USAGE: &str = "\
pwave: simulate a strongly damped p-Laplacian wave on a growing interval
and analyze the energy decay.

USAGE:
    pwave simulate CONFIG_FILE
    pwave check-constraints --p P --alpha A --m M --k K --gamma G
                            [--t-max T] [--grid-points N] [--json PATH]
    pwave komornik TRACE_CSV [--q Q] [--weight SPEC] [--json PATH]
    pwave fit TRACE_CSV --kind KIND [--p P] [--weight SPEC]
                        [--window-start T0 --window-end T1] [--json PATH]
    pwave sweep SWEEP_FILE
    pwave version

KIND is one of poly-in-phi, exp-in-phi, poly-in-t, exp-in-t.
SPEC is `identity` (phi(t) = t) or `powershift:K:GAMMA`
(phi(t) = (1 + K t)^GAMMA - 1).
Sweep parallelism honors the PWAVE_THREADS environment variable.

Exit codes: 0 success, 2 configuration or input errors, 3 solver blow-up,
4 analysis hypothesis violations.";

/// Dispatches a full argument vector (without argv[0]); returns the exit
/// code and prints errors to stderr.
pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{USAGE}");
            }
            e.exit_code()
        }
    }
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let Some(verb) = args.first() else {
        return Err(CliError::Usage("missing command".into()));
    };
    let rest = &args[1..];
    match verb.as_str() {
        "simulate" => commands::simulate(rest),
        "check-constraints" => commands::check_constraints(rest),
        "komornik" => commands::komornik(rest),
        "fit" => commands::fit(rest),
        "sweep" => commands::sweep(rest),
        "version" => {
            println!("pwave {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}
