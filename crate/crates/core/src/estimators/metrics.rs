//! Analysis metrics over slot streams: service-gap probabilities, Lyapunov
//! drift tables, face-decision fractions, wasted-service means, exponential
//! tail fits, and cone-distance diagnostics.

use serde::Serialize;

use crate::geometry::RateRegionGeometry;
use crate::switch::SlotRecord;

use super::{batch_means_se, quantile, EstimatorError};

/// Streaming estimator of the probability that a flow receives zero
/// cumulative service over a disjoint window of fixed length.
#[derive(Debug, Clone)]
pub struct GapAccumulator {
    window: usize,
    filled: usize,
    all_zero: Vec<bool>,
    zero_windows: Vec<u64>,
    windows: u64,
}

impl GapAccumulator {
    pub fn new(dim: usize, window: usize) -> Self {
        Self {
            window: window.max(1),
            filled: 0,
            all_zero: vec![true; dim],
            zero_windows: vec![0; dim],
            windows: 0,
        }
    }

    pub fn push(&mut self, service: &[f64]) {
        for (z, &s) in self.all_zero.iter_mut().zip(service) {
            *z &= s == 0.0;
        }
        self.filled += 1;
        if self.filled == self.window {
            for (count, z) in self.zero_windows.iter_mut().zip(&mut self.all_zero) {
                *count += *z as u64;
                *z = true;
            }
            self.filled = 0;
            self.windows += 1;
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Complete windows observed so far (the trailing partial one is dropped).
    pub fn windows(&self) -> u64 {
        self.windows
    }

    /// Per-flow fraction of all-zero windows; `None` before the first
    /// complete window.
    pub fn fractions(&self) -> Option<Vec<f64>> {
        if self.windows == 0 {
            return None;
        }
        Some(
            self.zero_windows
                .iter()
                .map(|&z| z as f64 / self.windows as f64)
                .collect(),
        )
    }
}

/// Per-flow estimate of the stationary probability of a `window`-slot
/// service gap, over disjoint windows of the given (post-burn-in) stream.
pub fn smoothness_gap(
    services: impl IntoIterator<Item = Vec<f64>>,
    window: usize,
) -> Result<Vec<f64>, EstimatorError> {
    if window == 0 {
        return Err(EstimatorError::Invalid("window must be >= 1".into()));
    }
    let mut acc: Option<GapAccumulator> = None;
    for s in services {
        acc.get_or_insert_with(|| GapAccumulator::new(s.len(), window))
            .push(&s);
    }
    acc.and_then(|a| a.fractions())
        .ok_or_else(|| EstimatorError::InsufficientData("no complete windows".into()))
}

/// Lyapunov function used by the drift diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    /// `|| sqrt(gamma) x ||`
    SqrtWeightedNorm,
    /// `sum_i gamma_i x_i^2`
    WeightedSquare,
}

impl LyapunovKind {
    pub fn eval(&self, gamma: &[f64], x: &[f64]) -> f64 {
        match self {
            LyapunovKind::SqrtWeightedNorm => gamma
                .iter()
                .zip(x)
                .map(|(&g, &v)| g * v * v)
                .sum::<f64>()
                .sqrt(),
            LyapunovKind::WeightedSquare => {
                gamma.iter().zip(x).map(|(&g, &v)| g * v * v).sum::<f64>()
            }
        }
    }
}

/// Buckets with fewer transitions than this are flagged insufficient.
pub const DRIFT_MIN_COUNT: u64 = 100;

/// One level bucket of the drift table.
#[derive(Debug, Clone, Serialize)]
pub struct DriftBucket {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub mean_increment: f64,
    pub se: f64,
    pub sufficient: bool,
}

/// Buckets one-step Lyapunov increments by the pre-transition level.
/// `levels` are ascending bucket boundaries; the last bucket is unbounded
/// above and values below the first boundary are ignored.
pub fn drift_check(
    records: impl IntoIterator<Item = SlotRecord>,
    gamma: &[f64],
    kind: LyapunovKind,
    levels: &[f64],
) -> Result<Vec<DriftBucket>, EstimatorError> {
    let gamma = gamma.to_vec();
    drift_from_pairs(
        records
            .into_iter()
            .map(move |r| (kind.eval(&gamma, &r.q_before), kind.eval(&gamma, &r.q_after))),
        levels,
    )
}

/// Same as [`drift_check`] over precomputed `(level, next level)` pairs.
pub fn drift_from_pairs(
    pairs: impl IntoIterator<Item = (f64, f64)>,
    levels: &[f64],
) -> Result<Vec<DriftBucket>, EstimatorError> {
    if levels.is_empty() {
        return Err(EstimatorError::Invalid("no bucket levels".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EstimatorError::Invalid(
            "bucket levels must be strictly increasing".into(),
        ));
    }
    let nb = levels.len();
    let mut count = vec![0u64; nb];
    let mut sum = vec![0.0f64; nb];
    let mut sumsq = vec![0.0f64; nb];
    for (before, after) in pairs {
        if before < levels[0] {
            continue;
        }
        let b = match levels.iter().rposition(|&l| before >= l) {
            Some(b) => b,
            None => continue,
        };
        let inc = after - before;
        count[b] += 1;
        sum[b] += inc;
        sumsq[b] += inc * inc;
    }
    if count.iter().all(|&c| c == 0) {
        return Err(EstimatorError::InsufficientData(
            "no transitions fall in any bucket".into(),
        ));
    }
    Ok((0..nb)
        .map(|b| {
            let n = count[b];
            let mean = if n > 0 { sum[b] / n as f64 } else { f64::NAN };
            let se = if n > 1 {
                let var = (sumsq[b] - sum[b] * sum[b] / n as f64) / (n - 1) as f64;
                (var.max(0.0) / n as f64).sqrt()
            } else {
                f64::NAN
            };
            DriftBucket {
                lo: levels[b],
                hi: if b + 1 < nb { levels[b + 1] } else { f64::INFINITY },
                count: n,
                mean_increment: mean,
                se,
                sufficient: n >= DRIFT_MIN_COUNT,
            }
        })
        .collect())
}

/// Fraction of slots whose logged decision mean lies off the outer face.
pub fn face_fraction(
    records: impl IntoIterator<Item = SlotRecord>,
    geom: &RateRegionGeometry,
) -> f64 {
    let mut off = 0u64;
    let mut total = 0u64;
    for r in records {
        total += 1;
        if !geom.face_decisions().contains(&r.decision) {
            off += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        off as f64 / total as f64
    }
}

/// Per-flow time-average of the wasted service with batch-means errors.
pub fn wasted_service_mean(
    records: impl IntoIterator<Item = SlotRecord>,
) -> Vec<(f64, f64)> {
    let mut per_flow: Vec<Vec<f64>> = Vec::new();
    for r in records {
        if per_flow.is_empty() {
            per_flow = vec![Vec::new(); r.wasted.len()];
        }
        for (col, &u) in per_flow.iter_mut().zip(&r.wasted) {
            col.push(u);
        }
    }
    per_flow
        .iter()
        .map(|col| {
            let mean = col.iter().sum::<f64>() / col.len().max(1) as f64;
            (mean, batch_means_se(col, super::BATCH_COUNT))
        })
        .collect()
}

/// Least-squares fit of `log P(L >= u)` against `u` over a grid spanning the
/// upper decile of the sample.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub rmse: f64,
    pub points: usize,
    /// Set when the upper decile carries no usable spread (e.g. point mass).
    pub degenerate: bool,
}

pub fn tail_fit(samples: &[f64]) -> Result<TailFit, EstimatorError> {
    if samples.len() < 100 {
        return Err(EstimatorError::InsufficientData(format!(
            "tail fit needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let lo = quantile(&sorted, 0.90);
    let hi = quantile(&sorted, 0.998);
    let mut us = Vec::new();
    let mut ys = Vec::new();
    let grid = 16;
    for k in 0..grid {
        let u = lo + (hi - lo) * k as f64 / (grid - 1) as f64;
        // count of samples >= u via binary search on the sorted data
        let idx = sorted.partition_point(|&x| x < u);
        let tail = (sorted.len() - idx) as f64;
        if tail > 0.0 && (us.last().is_none_or(|&last: &f64| u > last + 1e-300)) {
            us.push(u);
            ys.push((tail / n).ln());
        }
    }
    let spread = us.last().copied().unwrap_or(0.0) - us.first().copied().unwrap_or(0.0);
    if us.len() < 4 || spread <= 1e-12 {
        return Ok(TailFit {
            slope: f64::NEG_INFINITY,
            intercept: f64::NAN,
            rmse: f64::NAN,
            points: us.len(),
            degenerate: true,
        });
    }
    let m = us.len() as f64;
    let mean_u = us.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let sxx: f64 = us.iter().map(|u| (u - mean_u) * (u - mean_u)).sum();
    let sxy: f64 = us
        .iter()
        .zip(&ys)
        .map(|(u, y)| (u - mean_u) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_u;
    let rmse = (us
        .iter()
        .zip(&ys)
        .map(|(u, y)| {
            let e = y - (intercept + slope * u);
            e * e
        })
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(TailFit {
        slope,
        intercept,
        rmse,
        points: us.len(),
        degenerate: false,
    })
}

/// Tail fit of the chosen Lyapunov level over a record stream.
pub fn tail_fit_records(
    records: impl IntoIterator<Item = SlotRecord>,
    gamma: &[f64],
    kind: LyapunovKind,
) -> Result<TailFit, EstimatorError> {
    let levels: Vec<f64> = records
        .into_iter()
        .map(|r| kind.eval(gamma, &r.q_before))
        .collect();
    tail_fit(&levels)
}

/// Quantiles of the distance from the weighted queue vector's cone
/// projection to the relative boundary of the normal cone. In the
/// one-dimensional (pooled) case the distance reduces to the norm of the
/// cone projection.
#[derive(Debug, Clone, Serialize)]
pub struct ConeDistanceSummary {
    pub crp: bool,
    pub n: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

pub fn h_diagnostic(
    records: impl IntoIterator<Item = SlotRecord>,
    geom: &RateRegionGeometry,
    gamma: &[f64],
) -> Result<ConeDistanceSummary, EstimatorError> {
    let mut vals: Vec<f64> = records
        .into_iter()
        .map(|r| {
            let gq: Vec<f64> = gamma.iter().zip(&r.q_before).map(|(&g, &q)| g * q).collect();
            geom.rel_boundary_distance(&gq)
        })
        .collect();
    if vals.is_empty() {
        return Err(EstimatorError::InsufficientData("empty stream".into()));
    }
    vals.sort_unstable_by(f64::total_cmp);
    Ok(ConeDistanceSummary {
        crp: geom.is_crp(),
        n: vals.len(),
        q10: quantile(&vals, 0.10),
        q50: quantile(&vals, 0.50),
        q90: quantile(&vals, 0.90),
    })
}

/// Means over the dyadic tail windows `[n/2^j, n/2^(j-1))`, coarsest first
/// (so the last entry is the mean over the back half).
pub fn dyadic_window_means(values: &[f64], windows: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::new();
    for j in (1..=windows).rev() {
        let lo = n >> j;
        let hi = n >> (j - 1);
        if hi > lo {
            out.push(values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
        }
    }
    out
}

/// Ratios of consecutive dyadic window means; values near one indicate the
/// time averages have stabilized (the horizon was long enough).
pub fn window_stability_ratios(values: &[f64]) -> Vec<f64> {
    let means = dyadic_window_means(values, 4);
    means.windows(2).map(|w| w[1] / w[0]).collect()
}
