//! Steady-state estimation and the analysis metrics: empirical distributions
//! with projected two-sample distances, burn-in/thinned stationary estimates
//! with batch-means errors, service-gap probabilities, Lyapunov drift tables,
//! face-decision fractions, wasted-service means, tail fits, and cone
//! distance diagnostics.

mod empirical;
mod metrics;
mod stationary;

pub use empirical::{
    default_directions, energy_distance, ks_by_direction, ks_distance, quantile, two_sample_ks,
    EmpiricalDistribution,
};
pub use metrics::{
    drift_check, drift_from_pairs, dyadic_window_means, face_fraction, h_diagnostic,
    smoothness_gap, tail_fit, tail_fit_records, wasted_service_mean, window_stability_ratios,
    ConeDistanceSummary, DriftBucket, GapAccumulator, LyapunovKind, TailFit, DRIFT_MIN_COUNT,
};
pub use stationary::{
    batch_means_se, estimate_stationary, estimate_stationary_vectors, BatchMeans, FieldSelector,
    StationaryEstimate, BATCH_COUNT,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
}
