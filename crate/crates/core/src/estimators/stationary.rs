//! Burn-in/thinned stationary estimation with batch-means standard errors.

use crate::linalg::norm;
use crate::switch::SlotRecord;

use super::{EmpiricalDistribution, EstimatorError};

/// Batch count for batch-means standard errors of correlated streams.
pub const BATCH_COUNT: usize = 32;

/// Which field of a slot record is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSelector {
    QBefore,
    QAfter,
    Y,
    Wasted,
    Service,
    Arrival,
}

impl FieldSelector {
    pub fn extract(&self, r: &SlotRecord) -> Vec<f64> {
        match self {
            FieldSelector::QBefore => r.q_before.clone(),
            FieldSelector::QAfter => r.q_after.clone(),
            FieldSelector::Y => r.y.clone(),
            FieldSelector::Wasted => r.wasted.clone(),
            FieldSelector::Service => r.service.clone(),
            FieldSelector::Arrival => r.arrival.clone(),
        }
    }
}

/// Stationary sample set with the mean-norm statistic and its batch-means
/// standard error.
#[derive(Debug, Clone)]
pub struct StationaryEstimate {
    pub burn_in: u64,
    pub thin: u64,
    pub n_samples: usize,
    pub distribution: EmpiricalDistribution,
    pub mean_norm: f64,
    pub mean_norm_se: f64,
}

/// Samples the selected field at slots `burn_in, burn_in + thin, ...`.
pub fn estimate_stationary(
    records: impl IntoIterator<Item = SlotRecord>,
    burn_in: u64,
    thin: u64,
    selector: FieldSelector,
) -> Result<StationaryEstimate, EstimatorError> {
    estimate_stationary_vectors(
        records.into_iter().map(|r| selector.extract(&r)),
        burn_in,
        thin,
    )
}

/// Same as [`estimate_stationary`] over an already-selected vector stream.
pub fn estimate_stationary_vectors(
    vectors: impl IntoIterator<Item = Vec<f64>>,
    burn_in: u64,
    thin: u64,
) -> Result<StationaryEstimate, EstimatorError> {
    if thin == 0 {
        return Err(EstimatorError::Invalid("thin must be >= 1".into()));
    }
    let mut samples = Vec::new();
    for (t, v) in vectors.into_iter().enumerate() {
        let t = t as u64;
        if t >= burn_in && (t - burn_in).is_multiple_of(thin) {
            samples.push(v);
        }
    }
    if samples.is_empty() {
        return Err(EstimatorError::InsufficientData(format!(
            "no samples survive burn_in {burn_in} / thin {thin}"
        )));
    }
    let norms: Vec<f64> = samples.iter().map(|s| norm(s)).collect();
    let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
    let mean_norm_se = batch_means_se(&norms, BATCH_COUNT);
    Ok(StationaryEstimate {
        burn_in,
        thin,
        n_samples: samples.len(),
        distribution: EmpiricalDistribution::new(samples)?,
        mean_norm,
        mean_norm_se,
    })
}

/// Standard error of the mean of a correlated series by batch means: split
/// into `batch_count` equal batches (truncating the remainder) and use the
/// spread of the batch means. NaN when fewer than two batches fit.
pub fn batch_means_se(values: &[f64], batch_count: usize) -> f64 {
    let b = batch_count.min(values.len());
    if b < 2 {
        return f64::NAN;
    }
    let size = values.len() / b;
    let means: Vec<f64> = (0..b)
        .map(|i| values[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Streaming batch-means accumulator for runs whose length is known up
/// front: `batch_size` values per batch, [`finish`](Self::finish) yields the
/// overall mean and its standard error.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_size: u64,
    current_sum: f64,
    current_n: u64,
    means: Vec<f64>,
    total_sum: f64,
    total_n: u64,
}

impl BatchMeans {
    pub fn new(batch_size: u64) -> Self {
        Self {
            batch_size: batch_size.max(1),
            current_sum: 0.0,
            current_n: 0,
            means: Vec::new(),
            total_sum: 0.0,
            total_n: 0,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.current_sum += x;
        self.current_n += 1;
        self.total_sum += x;
        self.total_n += 1;
        if self.current_n == self.batch_size {
            self.means.push(self.current_sum / self.batch_size as f64);
            self.current_sum = 0.0;
            self.current_n = 0;
        }
    }

    pub fn count(&self) -> u64 {
        self.total_n
    }

    /// Overall mean and batch-means standard error (NaN with < 2 batches).
    pub fn finish(&self) -> (f64, f64) {
        if self.total_n == 0 {
            return (f64::NAN, f64::NAN);
        }
        let mean = self.total_sum / self.total_n as f64;
        let b = self.means.len();
        if b < 2 {
            return (mean, f64::NAN);
        }
        let grand = self.means.iter().sum::<f64>() / b as f64;
        let var = self
            .means
            .iter()
            .map(|m| (m - grand) * (m - grand))
            .sum::<f64>()
            / (b - 1) as f64;
        (mean, (var / b as f64).sqrt())
    }
}
