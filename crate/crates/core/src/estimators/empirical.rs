//! Weighted-uniform empirical distributions over R^m with projected
//! two-sample queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dot, norm};

use super::EstimatorError;

/// Seed of the fixed pseudo-random extra directions used by the projected
/// two-sample tests; fixed so reports are reproducible.
pub const DIRECTION_SEED: u64 = 0x4b53_4449_5253;

/// Uniformly weighted sample set in R^m.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    samples: Vec<Vec<f64>>,
    dim: usize,
}

impl EmpiricalDistribution {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self, EstimatorError> {
        let dim = match samples.first() {
            Some(s) => s.len(),
            None => {
                return Err(EstimatorError::InsufficientData(
                    "empirical distribution needs at least one sample".into(),
                ))
            }
        };
        for s in &samples {
            if s.len() != dim {
                return Err(EstimatorError::DimensionMismatch(dim, s.len()));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(EstimatorError::Invalid(format!(
                    "non-finite sample: {s:?}"
                )));
            }
        }
        Ok(Self { samples, dim })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self, EstimatorError> {
        Self::new(values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Scalar projections of every sample on `direction`.
    pub fn project(&self, direction: &[f64]) -> Vec<f64> {
        self.samples.iter().map(|s| dot(s, direction)).collect()
    }

    /// Quantiles of the projected sample at the given probabilities.
    pub fn projected_quantiles(&self, direction: &[f64], probs: &[f64]) -> Vec<f64> {
        let mut xs = self.project(direction);
        xs.sort_unstable_by(f64::total_cmp);
        probs.iter().map(|&p| quantile(&xs, p)).collect()
    }

    /// Mean Euclidean norm of the samples.
    pub fn mean_norm(&self) -> f64 {
        self.samples.iter().map(|s| norm(s)).sum::<f64>() / self.len() as f64
    }
}

/// Linear-interpolation quantile of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let p = p.clamp(0.0, 1.0);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Classical two-sample Kolmogorov-Smirnov statistic
/// `sup_x |F_a(x) - F_b(x)|`, in [0, 1].
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Default projection directions in dimension `dim`: the coordinate axes
/// plus `extra` fixed pseudo-random unit directions (none in dimension one,
/// where every direction gives the same statistic).
pub fn default_directions(dim: usize, extra: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        })
        .collect();
    if dim > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
        for _ in 0..extra {
            // uniform on the sphere: rejection-sample the unit ball
            loop {
                let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                let n = norm(&v);
                if n > 1e-3 && n <= 1.0 {
                    dirs.push(v.iter().map(|x| x / n).collect());
                    break;
                }
            }
        }
    }
    dirs
}

/// Projected two-sample KS distance: the maximum of the one-dimensional
/// statistics over the given directions.
pub fn ks_distance(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    directions: &[Vec<f64>],
) -> Result<f64, EstimatorError> {
    Ok(ks_by_direction(p, q, directions)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Per-direction projected KS statistics.
pub fn ks_by_direction(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    directions: &[Vec<f64>],
) -> Result<Vec<f64>, EstimatorError> {
    if p.dim() != q.dim() {
        return Err(EstimatorError::DimensionMismatch(p.dim(), q.dim()));
    }
    if directions.is_empty() {
        return Err(EstimatorError::Invalid("no projection directions".into()));
    }
    for d in directions {
        if d.len() != p.dim() {
            return Err(EstimatorError::DimensionMismatch(p.dim(), d.len()));
        }
    }
    Ok(directions
        .iter()
        .map(|d| two_sample_ks(&p.project(d), &q.project(d)))
        .collect())
}

/// Energy distance `2 E|X-Y| - E|X-X'| - E|Y-Y'|` estimated on evenly
/// strided subsamples of at most `cap` points each (pairwise sums are
/// quadratic in the subsample size).
pub fn energy_distance(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    cap: usize,
) -> Result<f64, EstimatorError> {
    if p.dim() != q.dim() {
        return Err(EstimatorError::DimensionMismatch(p.dim(), q.dim()));
    }
    if cap < 2 {
        return Err(EstimatorError::Invalid("cap must be at least 2".into()));
    }
    let xs = strided(p.samples(), cap);
    let ys = strided(q.samples(), cap);
    let mut dxy = 0.0;
    for x in &xs {
        for y in &ys {
            dxy += dist(x, y);
        }
    }
    dxy /= (xs.len() * ys.len()) as f64;
    Ok(2.0 * dxy - mean_self_dist(&xs) - mean_self_dist(&ys))
}

fn strided(samples: &[Vec<f64>], cap: usize) -> Vec<&[f64]> {
    let n = samples.len();
    if n <= cap {
        return samples.iter().map(|s| s.as_slice()).collect();
    }
    (0..cap)
        .map(|i| samples[i * n / cap].as_slice())
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn mean_self_dist(xs: &[&[f64]]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += dist(xs[i], xs[j]);
        }
    }
    2.0 * total / (n * n) as f64
}
