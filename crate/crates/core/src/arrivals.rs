//! Continuous arrival-vector distributions on a rectangle `[0, A^max]` with
//! densities bounded above and below by positive constants, parameterized to
//! hit any target mean in `(0, A^max)` per coordinate.
//!
//! Each coordinate is an exponentially tilted uniform on `[0, M]` with
//! density `theta * exp(theta x) / (exp(theta M) - 1)` (uniform at
//! `theta = 0`); coordinates are independent, so the joint density is the
//! product and inherits the bounds.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArrivalError {
    #[error("target mean {mean} outside (0, {max}) for coordinate {coord}")]
    MeanOutOfRange { coord: usize, mean: f64, max: f64 },
    #[error("invalid arrival parameters: {0}")]
    Invalid(String),
}

/// Per-coordinate solve accuracy for the tilt parameter.
pub const MEAN_TOL: f64 = 1e-10;

/// Product of tilted-uniform marginals on `[0, a_max]`.
#[derive(Debug, Clone)]
pub struct ArrivalFamily {
    a_max: Vec<f64>,
    tilt: Vec<f64>,
    mean: Vec<f64>,
    // cached expm1(theta_i * a_max_i), 0.0 sentinel for theta_i == 0
    exp_m1: Vec<f64>,
    density_lower: f64,
    density_upper: f64,
}

impl ArrivalFamily {
    /// Family whose per-coordinate means equal `target_mean` to within
    /// [`MEAN_TOL`].
    pub fn from_mean(a_max: Vec<f64>, target_mean: &[f64]) -> Result<Self, ArrivalError> {
        if a_max.is_empty() || a_max.len() != target_mean.len() {
            return Err(ArrivalError::Invalid(format!(
                "a_max length {} vs mean length {}",
                a_max.len(),
                target_mean.len()
            )));
        }
        if a_max.iter().any(|&m| !m.is_finite() || m <= 0.0) {
            return Err(ArrivalError::Invalid(format!(
                "a_max must be strictly positive: {a_max:?}"
            )));
        }
        let mut tilt = Vec::with_capacity(a_max.len());
        for (i, (&m, &target)) in a_max.iter().zip(target_mean).enumerate() {
            let theta = solve_tilt(target, m).map_err(|e| match e {
                ArrivalError::MeanOutOfRange { mean, max, .. } => {
                    ArrivalError::MeanOutOfRange { coord: i, mean, max }
                }
                other => other,
            })?;
            tilt.push(theta);
        }
        let exp_m1: Vec<f64> = tilt
            .iter()
            .zip(&a_max)
            .map(|(&t, &m)| if t == 0.0 { 0.0 } else { (t * m).exp_m1() })
            .collect();
        let mut lower = 1.0;
        let mut upper = 1.0;
        for i in 0..a_max.len() {
            let at0 = marginal_endpoint(tilt[i], exp_m1[i], a_max[i], 0.0);
            let at_max = marginal_endpoint(tilt[i], exp_m1[i], a_max[i], a_max[i]);
            lower *= at0.min(at_max);
            upper *= at0.max(at_max);
        }
        Ok(Self {
            a_max,
            tilt,
            mean: target_mean.to_vec(),
            exp_m1,
            density_lower: lower,
            density_upper: upper,
        })
    }

    pub fn dimension(&self) -> usize {
        self.a_max.len()
    }

    pub fn a_max(&self) -> &[f64] {
        &self.a_max
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn tilt(&self) -> &[f64] {
        &self.tilt
    }

    /// Positive lower and upper bounds of the joint density on the rectangle.
    /// The monotone marginals attain their extremes at the endpoints.
    pub fn density_bounds(&self) -> (f64, f64) {
        (self.density_lower, self.density_upper)
    }

    pub fn marginal_density(&self, coord: usize, x: f64) -> f64 {
        let m = self.a_max[coord];
        if !(0.0..=m).contains(&x) {
            return 0.0;
        }
        marginal_endpoint(self.tilt[coord], self.exp_m1[coord], m, x)
    }

    /// Joint density at `x` (zero outside the rectangle).
    pub fn density(&self, x: &[f64]) -> f64 {
        (0..self.dimension())
            .map(|i| self.marginal_density(i, x[i]))
            .product()
    }

    pub fn cdf(&self, coord: usize, x: f64) -> f64 {
        let m = self.a_max[coord];
        if x <= 0.0 {
            return 0.0;
        }
        if x >= m {
            return 1.0;
        }
        let t = self.tilt[coord];
        if t == 0.0 {
            x / m
        } else {
            (t * x).exp_m1() / self.exp_m1[coord]
        }
    }

    /// Inverse of [`cdf`](Self::cdf) on `[0, 1)`.
    pub fn inverse_cdf(&self, coord: usize, u: f64) -> f64 {
        let t = self.tilt[coord];
        if t == 0.0 {
            u * self.a_max[coord]
        } else {
            (u * self.exp_m1[coord]).ln_1p() / t
        }
    }

    /// One arrival vector: componentwise independent inverse-CDF draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.inverse_cdf(i, rng.random::<f64>());
        }
    }
}

fn marginal_endpoint(t: f64, exp_m1: f64, m: f64, x: f64) -> f64 {
    if t == 0.0 {
        1.0 / m
    } else {
        t * (t * x).exp() / exp_m1
    }
}

/// Mean of the tilted-uniform density on `[0, max]`, strictly increasing in
/// the tilt with range `(0, max)`.
pub fn tilt_mean(theta: f64, max: f64) -> f64 {
    let tm = theta * max;
    if tm.abs() < 1e-6 {
        // series around the uniform case; the next term is O(tm^5)
        max * (0.5 + tm / 12.0 - tm * tm * tm / 720.0)
    } else {
        max / (-(-tm).exp_m1()) - 1.0 / theta
    }
}

/// Tilt whose mean equals `target` on `[0, max]`: bisection, starting from
/// the bracket [-50, 50] and doubling it when the target lies outside.
pub fn solve_tilt(target: f64, max: f64) -> Result<f64, ArrivalError> {
    if !(target > 0.0 && target < max) || !target.is_finite() || !max.is_finite() {
        return Err(ArrivalError::MeanOutOfRange {
            coord: 0,
            mean: target,
            max,
        });
    }
    let mut lo = -50.0;
    let mut hi = 50.0;
    while tilt_mean(lo, max) > target {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(ArrivalError::Invalid(format!(
                "no bracket for mean {target} on [0, {max}]"
            )));
        }
    }
    while tilt_mean(hi, max) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(ArrivalError::Invalid(format!(
                "no bracket for mean {target} on [0, {max}]"
            )));
        }
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..200 {
        theta = 0.5 * (lo + hi);
        let m = tilt_mean(theta, max);
        if m == target {
            break;
        }
        if m < target {
            lo = theta;
        } else {
            hi = theta;
        }
    }
    let achieved = tilt_mean(theta, max);
    if (achieved - target).abs() > MEAN_TOL {
        return Err(ArrivalError::Invalid(format!(
            "bisection failed: mean {achieved} vs target {target}"
        )));
    }
    Ok(theta)
}
