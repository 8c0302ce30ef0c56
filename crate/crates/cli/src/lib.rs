//! Experiment harness for the generalized-switch MaxWeight simulator:
//! configuration, sweep orchestration, report persistence, and the
//! limit-chain comparison pipeline behind the `switchsim` binary.

pub mod collect;
pub mod compare;
pub mod config;
pub mod report;
pub mod sweep;
pub mod traj;

use std::path::PathBuf;

use config::ValidationReport;

/// Process exit code for configuration/validation failures.
pub const EXIT_VALIDATION: u8 = 2;
/// Process exit code for runtime failures (partial results may exist).
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// The config violated invariants; the report lists all of them.
    Validation(Box<ValidationReport>),
    /// A command argument was unusable (treated as a validation failure).
    BadArgument(String),
    Runtime(anyhow::Error),
    /// Some rows failed; the completed ones were kept.
    Partial { failed: usize, out_dir: PathBuf },
}

impl CliError {
    pub fn bad_argument(msg: String) -> Self {
        CliError::BadArgument(msg)
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::BadArgument(_) => EXIT_VALIDATION,
            CliError::Runtime(_) | CliError::Partial { .. } => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(report) => {
                writeln!(f, "configuration failed validation:")?;
                for v in &report.violations {
                    writeln!(f, "  - {v}")?;
                }
                Ok(())
            }
            CliError::BadArgument(msg) => write!(f, "{msg}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
            CliError::Partial { failed, out_dir } => write!(
                f,
                "{failed} row(s) failed; partial results kept under {}",
                out_dir.display()
            ),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}
