//! Single-pass metric collection over one simulated load point or one limit
//! chain run.

use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use switchsim_core::differential;
use switchsim_core::estimators::{
    default_directions, drift_from_pairs, energy_distance, estimate_stationary_vectors,
    ks_by_direction, quantile, window_stability_ratios, BatchMeans, DriftBucket,
    EmpiricalDistribution, GapAccumulator, LyapunovKind,
};
use switchsim_core::geometry::RateRegionGeometry;
use switchsim_core::linalg::norm;
use switchsim_core::switch;

use crate::config::SweepConfig;
use crate::traj::SlotTrajWriter;

#[derive(Debug, Clone, Serialize)]
pub struct QuantileSummary {
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

impl QuantileSummary {
    fn from_unsorted(mut vals: Vec<f64>) -> Self {
        vals.sort_unstable_by(f64::total_cmp);
        Self {
            q10: quantile(&vals, 0.10),
            q50: quantile(&vals, 0.50),
            q90: quantile(&vals, 0.90),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub window: usize,
    pub windows_observed: u64,
    pub per_flow: Vec<f64>,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsSummary {
    /// Maximum over the projection directions.
    pub max: f64,
    /// Conservative error bar `0.5 sqrt(1/n1 + 1/n2)`.
    pub se: f64,
    pub by_direction: Vec<f64>,
    pub max_direction: usize,
}

/// Everything measured on one (epsilon, replication) run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub epsilon: f64,
    pub replication: u32,
    pub seed: u64,
    pub horizon: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub lambda: Vec<f64>,
    pub n_samples: usize,
    pub y_mean_norm: f64,
    pub y_mean_norm_se: f64,
    pub gq_star_norm: QuantileSummary,
    pub gq_star_mean: MeanSe,
    pub h_distance: QuantileSummary,
    pub ks_vs_limit: Option<KsSummary>,
    pub energy_vs_limit: Option<f64>,
    pub smoothness: Vec<GapRow>,
    pub face_off_fraction: f64,
    pub wasted: Vec<MeanSe>,
    pub served: Vec<MeanSe>,
    pub drift_levels: Vec<f64>,
    pub drift: Vec<DriftBucket>,
    /// Single bucket above the 90th percentile of the Lyapunov level.
    pub drift_tail: DriftBucket,
    pub tie_fraction: f64,
    pub stability_ratios: Vec<f64>,
    pub slots: u64,
    pub runtime_s: f64,
}

pub struct RunSpec<'a> {
    pub cfg: &'a SweepConfig,
    pub geom: &'a RateRegionGeometry,
    pub epsilon: f64,
    pub replication: u32,
    pub seed: u64,
}

/// Simulates one load point and collects every metric in a single pass.
/// Returns the metrics and the stationary differential samples (for the
/// two-sample comparisons).
pub fn collect_run(
    spec: &RunSpec,
    limit_samples: Option<&EmpiricalDistribution>,
    mut traj: Option<&mut SlotTrajWriter>,
) -> anyhow::Result<(RunMetrics, EmpiricalDistribution)> {
    let started = Instant::now();
    let cfg = spec.cfg;
    let geom = spec.geom;
    let horizon = cfg.horizon_for(spec.epsilon);
    let burn_in = cfg.burn_in_for(horizon);
    let thin = cfg.estimators.thin;
    anyhow::ensure!(burn_in < horizon, "burn-in consumes the whole horizon");

    let lambda = geom.heavy_traffic_point(spec.epsilon)?;
    let model = cfg.build_model(&lambda)?;
    let gamma = model.gamma().to_vec();
    let n = model.dimension();

    let mut sim = switch::run(
        &model,
        geom,
        horizon,
        spec.seed,
        cfg.initial_q.as_deref(),
    )?;

    let post = horizon - burn_in;
    let batch = (post / 32).max(1);
    let mut gaps: Vec<GapAccumulator> = cfg
        .estimators
        .smoothness_windows
        .iter()
        .map(|&w| GapAccumulator::new(n, w))
        .collect();
    let mut wasted: Vec<BatchMeans> = (0..n).map(|_| BatchMeans::new(batch)).collect();
    let mut served: Vec<BatchMeans> = (0..n).map(|_| BatchMeans::new(batch)).collect();
    let on_face = {
        let mut mask = vec![false; model.decisions().len()];
        for &k in geom.face_decisions() {
            mask[k] = true;
        }
        mask
    };
    let mut face_off = 0u64;
    let mut y_samples: Vec<Vec<f64>> = Vec::new();
    let mut gq_norms: Vec<f64> = Vec::new();
    let mut h_vals: Vec<f64> = Vec::new();
    let mut level_pairs: Vec<(f64, f64)> = Vec::new();
    let mut q_norms: Vec<f64> = Vec::new();
    let mut gq = vec![0.0f64; n];

    let mut slots = 0u64;
    for rec in &mut sim {
        slots += 1;
        if let Some(w) = traj.as_deref_mut() {
            w.push(&rec)?;
        }
        if rec.t < burn_in {
            continue;
        }
        for gap in gaps.iter_mut() {
            gap.push(&rec.service);
        }
        for i in 0..n {
            wasted[i].push(rec.wasted[i]);
            served[i].push(rec.service[i] - rec.wasted[i]);
        }
        if !on_face[rec.decision] {
            face_off += 1;
        }
        if (rec.t - burn_in).is_multiple_of(thin) {
            for i in 0..n {
                gq[i] = gamma[i] * rec.q_before[i];
            }
            gq_norms.push(norm(&geom.project_cone(&gq)));
            h_vals.push(geom.rel_boundary_distance(&gq));
            level_pairs.push((
                LyapunovKind::SqrtWeightedNorm.eval(&gamma, &rec.q_before),
                LyapunovKind::SqrtWeightedNorm.eval(&gamma, &rec.q_after),
            ));
            q_norms.push(norm(&rec.q_before));
            y_samples.push(rec.y.clone());
        }
    }
    let tie_fraction = sim.tie_count() as f64 / horizon as f64;

    let est = estimate_stationary_vectors(y_samples, 0, 1)
        .context("stationary estimate of the differential samples")?;

    // drift buckets at quantile boundaries of the Lyapunov level
    let mut sorted_levels: Vec<f64> = level_pairs.iter().map(|p| p.0).collect();
    sorted_levels.sort_unstable_by(f64::total_cmp);
    let mut drift_levels: Vec<f64> = [0.5, 0.75, 0.9, 0.95, 0.99]
        .iter()
        .map(|&p| quantile(&sorted_levels, p))
        .collect();
    drift_levels.dedup_by(|b, a| *b <= *a + 1e-12);
    let drift = drift_from_pairs(level_pairs.iter().copied(), &drift_levels)
        .unwrap_or_default();
    let q90 = quantile(&sorted_levels, 0.9);
    let drift_tail = drift_from_pairs(level_pairs.iter().copied(), &[q90])
        .map(|mut v| v.remove(0))
        .unwrap_or(DriftBucket {
            lo: q90,
            hi: f64::INFINITY,
            count: 0,
            mean_increment: f64::NAN,
            se: f64::NAN,
            sufficient: false,
        });

    let ks_vs_limit = match limit_samples {
        Some(limit) => {
            let dirs = default_directions(est.distribution.dim(), cfg.estimators.ks_extra_directions);
            let by_direction = ks_by_direction(&est.distribution, limit, &dirs)?;
            let (max_direction, &max) = by_direction
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("at least one direction");
            let n1 = est.distribution.len() as f64;
            let n2 = limit.len() as f64;
            Some(KsSummary {
                max,
                se: 0.5 * (1.0 / n1 + 1.0 / n2).sqrt(),
                by_direction,
                max_direction,
            })
        }
        None => None,
    };
    let energy_vs_limit = match limit_samples {
        Some(limit) => Some(energy_distance(&est.distribution, limit, 2048)?),
        None => None,
    };

    let smoothness = gaps
        .iter()
        .map(|g| {
            let per_flow = g.fractions().unwrap_or_else(|| vec![f64::NAN; n]);
            let max = per_flow.iter().cloned().fold(f64::NAN, f64::max);
            GapRow {
                window: g.window(),
                windows_observed: g.windows(),
                per_flow,
                max,
            }
        })
        .collect();

    let metrics = RunMetrics {
        epsilon: spec.epsilon,
        replication: spec.replication,
        seed: spec.seed,
        horizon,
        burn_in,
        thin,
        lambda,
        n_samples: est.n_samples,
        y_mean_norm: est.mean_norm,
        y_mean_norm_se: est.mean_norm_se,
        gq_star_mean: MeanSe {
            mean: gq_norms.iter().sum::<f64>() / gq_norms.len().max(1) as f64,
            se: switchsim_core::estimators::batch_means_se(&gq_norms, 32),
        },
        gq_star_norm: QuantileSummary::from_unsorted(gq_norms),
        h_distance: QuantileSummary::from_unsorted(h_vals),
        ks_vs_limit,
        energy_vs_limit,
        smoothness,
        face_off_fraction: face_off as f64 / (horizon - burn_in) as f64,
        wasted: wasted
            .iter()
            .map(|b| {
                let (mean, se) = b.finish();
                MeanSe { mean, se }
            })
            .collect(),
        served: served
            .iter()
            .map(|b| {
                let (mean, se) = b.finish();
                MeanSe { mean, se }
            })
            .collect(),
        drift_levels,
        drift,
        drift_tail,
        tie_fraction,
        stability_ratios: window_stability_ratios(&q_norms),
        slots,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    Ok((metrics, est.distribution))
}

/// Metrics of the limit-chain run.
#[derive(Debug, Clone, Serialize)]
pub struct LimitMetrics {
    pub seed: u64,
    pub horizon: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub n_samples: usize,
    pub y_mean_norm: f64,
    pub y_mean_norm_se: f64,
    pub smoothness: Vec<GapRow>,
    pub stability_ratios: Vec<f64>,
    pub slots: u64,
    pub runtime_s: f64,
}

/// Simulates the limit chain once (its law does not depend on the load
/// schedule) and collects the metrics shared across rows.
pub fn collect_limit(
    cfg: &SweepConfig,
    geom: &RateRegionGeometry,
    seed: u64,
    mut traj: Option<&mut crate::traj::ChainTrajWriter>,
) -> anyhow::Result<(LimitMetrics, EmpiricalDistribution)> {
    let started = Instant::now();
    let horizon = cfg.limit_horizon();
    let burn_in = cfg.burn_in_for(horizon);
    let thin = cfg.estimators.thin;
    anyhow::ensure!(burn_in < horizon, "burn-in consumes the whole horizon");

    let model = cfg.build_model(geom.lambda_star())?;
    let n = model.dimension();

    let mut chain = differential::run(&model, geom, horizon, seed, None)?;
    let mut gaps: Vec<GapAccumulator> = cfg
        .estimators
        .smoothness_windows
        .iter()
        .map(|&w| GapAccumulator::new(n, w))
        .collect();
    let mut y_samples: Vec<Vec<f64>> = Vec::new();
    let mut y_norms: Vec<f64> = Vec::new();
    let mut slots = 0u64;
    for rec in &mut chain {
        slots += 1;
        if let Some(w) = traj.as_deref_mut() {
            w.push(&rec)?;
        }
        if rec.t < burn_in {
            continue;
        }
        for gap in gaps.iter_mut() {
            gap.push(&rec.service);
        }
        if (rec.t - burn_in).is_multiple_of(thin) {
            y_norms.push(norm(&rec.y));
            y_samples.push(rec.y);
        }
    }
    let est = estimate_stationary_vectors(y_samples, 0, 1)
        .context("stationary estimate of the limit chain")?;
    let smoothness = gaps
        .iter()
        .map(|g| {
            let per_flow = g.fractions().unwrap_or_else(|| vec![f64::NAN; n]);
            let max = per_flow.iter().cloned().fold(f64::NAN, f64::max);
            GapRow {
                window: g.window(),
                windows_observed: g.windows(),
                per_flow,
                max,
            }
        })
        .collect();
    let metrics = LimitMetrics {
        seed,
        horizon,
        burn_in,
        thin,
        n_samples: est.n_samples,
        y_mean_norm: est.mean_norm,
        y_mean_norm_se: est.mean_norm_se,
        smoothness,
        stability_ratios: window_stability_ratios(&y_norms),
        slots,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    Ok((metrics, est.distribution))
}

/// Derived per-task seed: a 64-bit mix of the base seed and the task
/// coordinates, so tasks are independent of scheduling order.
pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        ^ a.rotate_left(17).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.rotate_left(31).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
