//! Detailed comparison of one load point's stationary differential samples
//! against the limit chain: per-direction quantile tables and KS statistics.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;
use switchsim_core::estimators::{
    default_directions, energy_distance, ks_by_direction, EmpiricalDistribution,
};

use crate::collect::{collect_limit, collect_run, mix_seed, RunSpec};
use crate::config::SweepConfig;
use crate::sweep::{default_out_dir, validated_geometry, write_json, RunOptions};
use crate::CliError;

const QUANTILE_PROBS: [f64; 9] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];

#[derive(Debug, Clone, Serialize)]
pub struct QuantilePair {
    pub p: f64,
    pub run: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionComparison {
    pub direction: Vec<f64>,
    pub ks: f64,
    pub quantiles: Vec<QuantilePair>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareArtifact {
    pub fixture: String,
    pub epsilon: f64,
    pub run_seed: u64,
    pub limit_seed: u64,
    pub n_run: usize,
    pub n_limit: usize,
    pub directions: Vec<DirectionComparison>,
    /// Index of the direction attaining the maximum KS.
    pub max_direction: usize,
    pub ks_max: f64,
    pub energy: f64,
}

/// Builds the paired comparison tables for one epsilon of the schedule.
pub fn compare_to_limit(
    cfg: &SweepConfig,
    epsilon: f64,
    opts: &RunOptions,
) -> Result<(PathBuf, CompareArtifact), CliError> {
    let geom = validated_geometry(cfg)?;
    let Some(eps_index) = cfg.epsilons.iter().position(|&e| e == epsilon) else {
        return Err(CliError::bad_argument(format!(
            "epsilon {epsilon} is not in the schedule {:?}",
            cfg.epsilons
        )));
    };
    let base_seed = opts.seed.unwrap_or(cfg.base_seed);
    let run_seed = mix_seed(base_seed, 1 + eps_index as u64, 1);
    let limit_seed = mix_seed(base_seed, 0, 0);
    let out_dir = opts
        .out
        .clone()
        .unwrap_or_else(|| default_out_dir(&cfg.name));

    let inner = || -> anyhow::Result<CompareArtifact> {
        std::fs::create_dir_all(&out_dir)?;
        let (_, limit_samples) = collect_limit(cfg, &geom, limit_seed, None)?;
        let spec = RunSpec {
            cfg,
            geom: &geom,
            epsilon,
            replication: 0,
            seed: run_seed,
        };
        let (_, run_samples) = collect_run(&spec, Some(&limit_samples), None)?;
        let artifact = build_artifact(
            &cfg.name,
            epsilon,
            run_seed,
            limit_seed,
            &run_samples,
            &limit_samples,
            cfg.estimators.ks_extra_directions,
        )?;
        write_json(
            &out_dir.join(format!("compare_eps{eps_index}.json")),
            &json!(artifact),
        )?;
        Ok(artifact)
    };
    let artifact = inner().map_err(CliError::Runtime)?;
    Ok((out_dir, artifact))
}

/// Pure comparison of two sample sets (exposed for tests).
pub fn build_artifact(
    fixture: &str,
    epsilon: f64,
    run_seed: u64,
    limit_seed: u64,
    run_samples: &EmpiricalDistribution,
    limit_samples: &EmpiricalDistribution,
    extra_directions: usize,
) -> anyhow::Result<CompareArtifact> {
    let dirs = default_directions(run_samples.dim(), extra_directions);
    let ks = ks_by_direction(run_samples, limit_samples, &dirs)?;
    let directions: Vec<DirectionComparison> = dirs
        .iter()
        .zip(&ks)
        .map(|(d, &ks)| {
            let run_q = run_samples.projected_quantiles(d, &QUANTILE_PROBS);
            let lim_q = limit_samples.projected_quantiles(d, &QUANTILE_PROBS);
            DirectionComparison {
                direction: d.clone(),
                ks,
                quantiles: QUANTILE_PROBS
                    .iter()
                    .zip(run_q.iter().zip(&lim_q))
                    .map(|(&p, (&run, &limit))| QuantilePair { p, run, limit })
                    .collect(),
            }
        })
        .collect();
    let (max_direction, ks_max) = ks
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &v)| (i, v))
        .expect("at least one direction");
    Ok(CompareArtifact {
        fixture: fixture.to_string(),
        epsilon,
        run_seed,
        limit_seed,
        n_run: run_samples.len(),
        n_limit: limit_samples.len(),
        directions,
        max_direction,
        ks_max,
        energy: energy_distance(run_samples, limit_samples, 2048)?,
    })
}
