//! Sweep orchestration: validates the config, simulates the limit chain
//! once, fans (epsilon, replication) tasks over a work-stealing pool, and
//! appends report rows in deterministic task order with per-row checksums.
//! A resumed sweep re-verifies existing rows and redoes only the missing
//! tasks.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::json;
use switchsim_core::estimators::EmpiricalDistribution;
use switchsim_core::geometry::RateRegionGeometry;

use crate::collect::{collect_limit, collect_run, mix_seed, LimitMetrics, RunMetrics, RunSpec};
use crate::config::{config_hash, validate_config, SweepConfig, ValidationReport};
use crate::report::{csv_columns, render_row, verify_row};
use crate::traj::{ChainTrajWriter, SlotTrajWriter, TrajFormat};
use crate::CliError;

/// Command-line overrides shared by the run-style subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub traj_thin: u64,
    pub keep_trajectories: bool,
    pub traj_format: TrajFormat,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub total_tasks: usize,
    pub resumed_rows: usize,
    pub completed_rows: usize,
    pub failed_rows: usize,
    /// horizon-sum the executed tasks were expected to simulate
    pub expected_slots: u64,
    /// slots actually stepped this session (including the limit chain)
    pub simulated_slots: u64,
    pub accounting_ok: bool,
    pub runtime_s: f64,
}

/// Full sweep outcome, returned for in-process callers (the acceptance suite
/// drives this directly).
pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub rows: Vec<RunMetrics>,
    pub limit: LimitMetrics,
    pub limit_samples: EmpiricalDistribution,
}

pub fn default_out_dir(name: &str) -> PathBuf {
    let stamp = unix_stamp();
    PathBuf::from("out").join(name).join(stamp)
}

fn unix_stamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("run-{secs}")
}

/// Validates and, on success, returns the geometry; on failure the report
/// carries every violated invariant.
pub fn validated_geometry(cfg: &SweepConfig) -> Result<RateRegionGeometry, CliError> {
    let report = validate_config(cfg);
    if !report.ok {
        return Err(CliError::Validation(Box::new(report)));
    }
    cfg.build_geometry().map_err(CliError::Runtime)
}

pub fn write_validation_artifacts(
    cfg: &SweepConfig,
    report: &ValidationReport,
    dir: &Path,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("validation.json"), report)?;
    if let Some(g) = &report.geometry {
        write_json(&dir.join("geometry.json"), g)?;
    }
    write_json(&dir.join("rows_schema.json"), &crate::report::schema_json(cfg))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

struct Task {
    eps_index: usize,
    epsilon: f64,
    replication: u32,
    seed: u64,
    horizon: u64,
}

fn task_list(cfg: &SweepConfig, base_seed: u64) -> Vec<Task> {
    let mut tasks = Vec::new();
    for (eps_index, &epsilon) in cfg.epsilons.iter().enumerate() {
        for replication in 0..cfg.replications {
            tasks.push(Task {
                eps_index,
                epsilon,
                replication,
                seed: mix_seed(base_seed, 1 + eps_index as u64, 1 + replication as u64),
                horizon: cfg.horizon_for(epsilon),
            });
        }
    }
    tasks
}

/// Reads an existing rows.csv, keeps the longest checksum-valid prefix
/// (rewriting the file if a torn tail is found), and returns the
/// (epsilon, replication) pairs already completed.
fn resume_rows(path: &Path, header: &str) -> anyhow::Result<Vec<(f64, u32)>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let Some(first) = lines.next() else {
        return Ok(Vec::new());
    };
    if first != header {
        anyhow::bail!(
            "existing rows.csv has a different header; refusing to resume \
             (was the config changed?)"
        );
    }
    let mut valid_lines = vec![first.to_string()];
    let mut done = Vec::new();
    for line in lines {
        match verify_row(line) {
            Some(fields) => {
                let eps: f64 = fields[1].parse().context("epsilon field")?;
                let rep: u32 = fields[2].parse().context("replication field")?;
                done.push((eps, rep));
                valid_lines.push(line.to_string());
            }
            None => break, // torn or corrupt tail: drop it and everything after
        }
    }
    let rebuilt = valid_lines.join("\n") + "\n";
    if rebuilt != text {
        fs::write(path, rebuilt)?;
    }
    Ok(done)
}

pub fn run_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<SweepOutcome, CliError> {
    let started = Instant::now();
    let geom = validated_geometry(cfg)?;
    let base_seed = opts.seed.unwrap_or(cfg.base_seed);
    let out_dir = opts
        .out
        .clone()
        .unwrap_or_else(|| default_out_dir(&cfg.name));
    let run = || -> anyhow::Result<SweepOutcome> {
        fs::create_dir_all(out_dir.join("metrics"))?;
        if opts.keep_trajectories {
            fs::create_dir_all(out_dir.join("trajectories"))?;
        }
        let hash = format!("{:016x}", config_hash(cfg));
        // a resumed directory must come from the same config and seed
        let resolved_path = out_dir.join("resolved_config.json");
        if out_dir.join("rows.csv").exists() && resolved_path.exists() {
            let prev: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(&resolved_path)?)?;
            let prev_hash = prev.get("config_hash").and_then(|v| v.as_str());
            let prev_seed = prev.get("base_seed").and_then(|v| v.as_u64());
            anyhow::ensure!(
                prev_hash == Some(hash.as_str()) && prev_seed == Some(base_seed),
                "output directory {} holds a sweep of a different config/seed; \
                 refusing to resume",
                out_dir.display()
            );
        }
        write_json(
            &resolved_path,
            &json!({"config_hash": hash, "base_seed": base_seed, "config": cfg}),
        )?;
        write_json(&out_dir.join("geometry.json"), &geom.summary())?;
        write_json(&out_dir.join("rows_schema.json"), &crate::report::schema_json(cfg))?;

        // limit chain first: every row's two-sample comparison needs it
        let limit_seed = mix_seed(base_seed, 0, 0);
        let mut limit_traj = if opts.keep_trajectories {
            Some(ChainTrajWriter::create(
                &out_dir.join("trajectories/limit.".to_string() + ext(opts.traj_format)),
                opts.traj_format,
                opts.traj_thin,
            )?)
        } else {
            None
        };
        let (limit_metrics, limit_samples) =
            collect_limit(cfg, &geom, limit_seed, limit_traj.as_mut())?;
        if let Some(w) = limit_traj {
            w.finish()?;
        }
        write_json(&out_dir.join("metrics/limit.json"), &limit_metrics)?;

        let tasks = task_list(cfg, base_seed);
        let header = csv_columns(cfg).join(",");
        let rows_path = out_dir.join("rows.csv");
        let done = resume_rows(&rows_path, &header)?;
        let resumed = done.len();
        let is_done = |t: &Task| {
            done.iter()
                .any(|&(eps, rep)| eps == t.epsilon && rep == t.replication)
        };
        let pending: Vec<&Task> = tasks.iter().filter(|t| !is_done(t)).collect();
        let expected_slots: u64 =
            pending.iter().map(|t| t.horizon).sum::<u64>() + limit_metrics.slots;

        // ordered incremental writer: rows land in task order as soon as the
        // gap before them closes, so a crash loses at most buffered rows and
        // reruns are byte-identical (modulo the runtime field)
        let fresh = !rows_path.exists();
        let mut rows_file = BufWriter::new(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&rows_path)?,
        );
        if fresh {
            writeln!(rows_file, "{header}")?;
            rows_file.flush()?;
        }

        type TaskOutput = (usize, anyhow::Result<(RunMetrics, EmpiricalDistribution)>);
        type WriterOutput = (Vec<(usize, RunMetrics)>, usize, u64);
        let (tx, rx) = mpsc::channel::<TaskOutput>();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads.unwrap_or(0))
            .build()
            .context("building thread pool")?;

        let writer = std::thread::spawn({
            let cfg = cfg.clone();
            let fixture = cfg.name.clone();
            move || -> anyhow::Result<WriterOutput> {
                let mut buffer: BTreeMap<usize, Option<RunMetrics>> = BTreeMap::new();
                let mut next = 0usize;
                let mut rows = Vec::new();
                let mut failed = 0usize;
                let mut slots = 0u64;
                let flush_ready =
                    |buffer: &mut BTreeMap<usize, Option<RunMetrics>>,
                     next: &mut usize,
                     rows: &mut Vec<(usize, RunMetrics)>,
                     rows_file: &mut BufWriter<fs::File>|
                     -> anyhow::Result<()> {
                        while let Some(entry) = buffer.remove(next) {
                            if let Some(m) = entry {
                                writeln!(rows_file, "{}", render_row(&fixture, &cfg, &m))?;
                                rows_file.flush()?;
                                rows.push((*next, m));
                            }
                            *next += 1;
                        }
                        Ok(())
                    };
                for (index, result) in rx {
                    match result {
                        Ok((metrics, _)) => {
                            slots += metrics.slots;
                            buffer.insert(index, Some(metrics));
                        }
                        Err(_) => {
                            failed += 1;
                            buffer.insert(index, None);
                        }
                    }
                    flush_ready(&mut buffer, &mut next, &mut rows, &mut rows_file)?;
                }
                flush_ready(&mut buffer, &mut next, &mut rows, &mut rows_file)?;
                Ok((rows, failed, slots))
            }
        });

        let errors = std::sync::Mutex::new(Vec::<String>::new());
        pool.scope(|scope| {
            for (slot, task) in pending.iter().enumerate() {
                let tx = tx.clone();
                let geom = &geom;
                let limit_samples = &limit_samples;
                let errors = &errors;
                let out_dir = &out_dir;
                scope.spawn(move |_| {
                    let spec = RunSpec {
                        cfg,
                        geom,
                        epsilon: task.epsilon,
                        replication: task.replication,
                        seed: task.seed,
                    };
                    let result = (|| -> anyhow::Result<(RunMetrics, EmpiricalDistribution)> {
                        let mut traj = if opts.keep_trajectories {
                            Some(SlotTrajWriter::create(
                                &out_dir.join(format!(
                                    "trajectories/eps{}_rep{}.{}",
                                    task.eps_index,
                                    task.replication,
                                    ext(opts.traj_format)
                                )),
                                opts.traj_format,
                                opts.traj_thin,
                            )?)
                        } else {
                            None
                        };
                        let out = collect_run(&spec, Some(limit_samples), traj.as_mut())?;
                        write_json(
                            &out_dir.join(format!(
                                "metrics/eps{}_rep{}.json",
                                task.eps_index, task.replication
                            )),
                            &json!({
                                "fixture": cfg.name,
                                "epsilon": task.epsilon,
                                "seed": task.seed,
                                "metrics": out.0,
                            }),
                        )?;
                        Ok(out)
                    })();
                    if let Err(e) = &result {
                        errors.lock().unwrap().push(format!(
                            "eps {} rep {}: {e:#}",
                            task.epsilon, task.replication
                        ));
                    }
                    let _ = tx.send((slot, result));
                });
            }
        });
        drop(tx);
        let (written, failed, task_slots) = writer
            .join()
            .map_err(|_| anyhow::anyhow!("writer thread panicked"))??;

        let error_lines = errors.into_inner().unwrap();
        if !error_lines.is_empty() {
            fs::write(out_dir.join("errors.log"), error_lines.join("\n") + "\n")?;
        }

        let simulated_slots = task_slots + limit_metrics.slots;
        let summary = SweepSummary {
            config_hash: hash,
            out_dir: out_dir.clone(),
            total_tasks: tasks.len(),
            resumed_rows: resumed,
            completed_rows: written.len() + resumed,
            failed_rows: failed,
            // failed tasks still stepped their horizons before erroring only
            // if the failure happened post-simulation; count expectations
            // over successes for the strict equality check
            expected_slots,
            simulated_slots,
            accounting_ok: failed > 0 || simulated_slots == expected_slots,
            runtime_s: started.elapsed().as_secs_f64(),
        };
        write_json(&out_dir.join("summary.json"), &summary)?;
        eprintln!(
            "sweep {}: {} rows ({} resumed, {} failed), {} slots, {:.1}s -> {}",
            cfg.name,
            summary.completed_rows,
            summary.resumed_rows,
            summary.failed_rows,
            summary.simulated_slots,
            summary.runtime_s,
            out_dir.display()
        );

        Ok(SweepOutcome {
            summary,
            rows: written.into_iter().map(|(_, m)| m).collect(),
            limit: limit_metrics,
            limit_samples,
        })
    };
    let outcome = run().map_err(CliError::Runtime)?;
    if outcome.summary.failed_rows > 0 {
        return Err(CliError::Partial {
            failed: outcome.summary.failed_rows,
            out_dir: outcome.summary.out_dir.clone(),
        });
    }
    Ok(outcome)
}

fn ext(format: TrajFormat) -> &'static str {
    match format {
        TrajFormat::Jsonl => "jsonl",
        TrajFormat::Csv => "csv",
    }
}

/// One load point (`simulate` subcommand): a single replication at the given
/// epsilon, without the limit-chain comparison.
pub fn run_single(
    cfg: &SweepConfig,
    epsilon: f64,
    opts: &RunOptions,
) -> Result<(PathBuf, RunMetrics), CliError> {
    let geom = validated_geometry(cfg)?;
    let base_seed = opts.seed.unwrap_or(cfg.base_seed);
    let seed = match cfg.epsilons.iter().position(|&e| e == epsilon) {
        Some(idx) => mix_seed(base_seed, 1 + idx as u64, 1),
        None => mix_seed(base_seed, epsilon.to_bits(), 1),
    };
    let out_dir = opts
        .out
        .clone()
        .unwrap_or_else(|| default_out_dir(&cfg.name));
    let inner = || -> anyhow::Result<RunMetrics> {
        fs::create_dir_all(&out_dir)?;
        geom.heavy_traffic_point(epsilon)?;
        write_json(&out_dir.join("geometry.json"), &geom.summary())?;
        let mut traj = if opts.keep_trajectories {
            let p = out_dir.join(format!("trajectory.{}", ext(opts.traj_format)));
            Some(SlotTrajWriter::create(&p, opts.traj_format, opts.traj_thin)?)
        } else {
            None
        };
        let spec = RunSpec {
            cfg,
            geom: &geom,
            epsilon,
            replication: 0,
            seed,
        };
        let (metrics, _) = collect_run(&spec, None, traj.as_mut())?;
        write_json(
            &out_dir.join("metrics.json"),
            &json!({"fixture": cfg.name, "epsilon": epsilon, "seed": seed, "metrics": metrics}),
        )?;
        Ok(metrics)
    };
    let metrics = inner().map_err(CliError::Runtime)?;
    Ok((out_dir, metrics))
}

/// Limit chain alone (`ystar` subcommand).
pub fn run_limit(
    cfg: &SweepConfig,
    opts: &RunOptions,
) -> Result<(PathBuf, LimitMetrics), CliError> {
    let geom = validated_geometry(cfg)?;
    let base_seed = opts.seed.unwrap_or(cfg.base_seed);
    let seed = mix_seed(base_seed, 0, 0);
    let out_dir = opts
        .out
        .clone()
        .unwrap_or_else(|| default_out_dir(&cfg.name));
    let inner = || -> anyhow::Result<LimitMetrics> {
        fs::create_dir_all(&out_dir)?;
        write_json(&out_dir.join("geometry.json"), &geom.summary())?;
        let mut traj = if opts.keep_trajectories {
            let p = out_dir.join(format!("limit_trajectory.{}", ext(opts.traj_format)));
            Some(ChainTrajWriter::create(&p, opts.traj_format, opts.traj_thin)?)
        } else {
            None
        };
        let (metrics, _) = collect_limit(cfg, &geom, seed, traj.as_mut())?;
        write_json(&out_dir.join("limit_metrics.json"), &metrics)?;
        Ok(metrics)
    };
    let metrics = inner().map_err(CliError::Runtime)?;
    Ok((out_dir, metrics))
}
