use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use switchsim_cli::config::{validate_config, SweepConfig};
use switchsim_cli::sweep::{
    run_limit, run_single, run_sweep, write_validation_artifacts, RunOptions,
};
use switchsim_cli::traj::TrajFormat;
use switchsim_cli::{compare, CliError, EXIT_VALIDATION};

/// Discrete-time generalized-switch simulator under MaxWeight scheduling:
/// load sweeps toward a boundary point, stationary estimation of the
/// queue-differential process, and comparison against its limit chain.
#[derive(Parser)]
#[command(name = "switchsim", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunFlags {
    /// Config JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: out/<name>/run-<unix time>; reuse a
    /// directory to resume a sweep).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep-every-k thinning for persisted trajectories.
    #[arg(long, default_value_t = 1)]
    thin: u64,
    /// Persist the simulated trajectories.
    #[arg(long)]
    keep_trajectories: bool,
    /// Trajectory file format.
    #[arg(long, value_enum, default_value_t = TrajFormat::Jsonl)]
    traj_format: TrajFormat,
}

impl RunFlags {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            traj_thin: self.thin,
            keep_trajectories: self.keep_trajectories,
            traj_format: self.traj_format,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the config, print the geometry summary and resolved load points.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Also write validation.json / geometry.json / rows_schema.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a single load point and write its metrics.
    Simulate {
        #[command(flatten)]
        flags: RunFlags,
        /// Distance from the boundary along nu'.
        #[arg(long)]
        epsilon: f64,
    },
    /// Simulate the limiting queue-differential chain and write its metrics.
    Ystar {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the full load sweep: every (epsilon, replication) plus the limit
    /// chain, with incremental checksummed report rows.
    Sweep {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Paired quantile tables and per-direction KS against the limit chain.
    Compare {
        #[command(flatten)]
        flags: RunFlags,
        /// Epsilon (must be in the config's schedule).
        #[arg(long)]
        epsilon: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load(path: &std::path::Path) -> Result<SweepConfig, CliError> {
    SweepConfig::load(path).map_err(|e| CliError::bad_argument(format!("{e:#}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Validate { config, out } => {
            let cfg = load(&config)?;
            let report = validate_config(&cfg);
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            if let Some(dir) = out {
                write_validation_artifacts(&cfg, &report, &dir)?;
            }
            if report.ok {
                Ok(())
            } else {
                std::process::exit(EXIT_VALIDATION as i32);
            }
        }
        Cmd::Simulate { flags, epsilon } => {
            let cfg = load(&flags.config)?;
            let (dir, metrics) = run_single(&cfg, epsilon, &flags.options())?;
            eprintln!(
                "simulated eps {epsilon}: {} samples, E||Y|| = {:.6} -> {}",
                metrics.n_samples,
                metrics.y_mean_norm,
                dir.display()
            );
            Ok(())
        }
        Cmd::Ystar { flags } => {
            let cfg = load(&flags.config)?;
            let (dir, metrics) = run_limit(&cfg, &flags.options())?;
            eprintln!(
                "limit chain: {} samples, E||Y|| = {:.6} -> {}",
                metrics.n_samples,
                metrics.y_mean_norm,
                dir.display()
            );
            Ok(())
        }
        Cmd::Sweep { flags } => {
            let cfg = load(&flags.config)?;
            run_sweep(&cfg, &flags.options())?;
            Ok(())
        }
        Cmd::Compare { flags, epsilon } => {
            let cfg = load(&flags.config)?;
            let (dir, artifact) = compare::compare_to_limit(&cfg, epsilon, &flags.options())?;
            eprintln!(
                "compare eps {epsilon}: KS max {:.6} on direction {} -> {}",
                artifact.ks_max,
                artifact.max_direction,
                dir.display()
            );
            Ok(())
        }
    }
}
