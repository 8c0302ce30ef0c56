//! Sweep configuration: a single JSON document describing the switch, the
//! boundary load point, the load schedule, and the estimator settings.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use switchsim_core::arrivals::ArrivalFamily;
use switchsim_core::geometry::{GeometrySummary, RateRegionGeometry};
use switchsim_core::switch::{Outcome, ServiceDecision, SwitchModel, TieBreak};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeConfig {
    pub service: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionConfig {
    pub outcomes: Vec<OutcomeConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub decisions: Vec<DecisionConfig>,
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalConfig {
    pub a_max: Vec<f64>,
}

fn default_thin() -> u64 {
    16
}

fn default_windows() -> Vec<usize> {
    vec![10, 25, 50]
}

fn default_extra_directions() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Slots discarded before sampling; default max(horizon/5, 1e5).
    #[serde(default)]
    pub burn_in: Option<u64>,
    /// Sampling stride after burn-in.
    #[serde(default = "default_thin")]
    pub thin: u64,
    /// Window lengths for the service-gap probabilities.
    #[serde(default = "default_windows")]
    pub smoothness_windows: Vec<usize>,
    /// Pseudo-random unit directions added to the coordinate axes for the
    /// projected two-sample tests.
    #[serde(default = "default_extra_directions")]
    pub ks_extra_directions: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            burn_in: None,
            thin: default_thin(),
            smoothness_windows: default_windows(),
            ks_extra_directions: default_extra_directions(),
        }
    }
}

/// Gap probabilities pinned by an independent pilot run; acceptance
/// thresholds derive from these values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothnessPilot {
    pub seed: u64,
    pub horizon: u64,
    pub epsilon: f64,
    /// window (as a string key) -> max-over-flows gap probability
    pub gaps: BTreeMap<String, f64>,
    /// same for the limit chain
    pub limit_gaps: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub model: ModelConfig,
    pub arrivals: ArrivalConfig,
    /// Maximal boundary load point.
    pub lambda_star: Vec<f64>,
    /// Optional explicit outer normal (one-dimensional cone).
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    /// Optional explicit cone generators; skips facet enumeration.
    #[serde(default)]
    pub generators: Option<Vec<Vec<f64>>>,
    /// Load schedule, strictly decreasing distances from the boundary.
    pub epsilons: Vec<f64>,
    /// Slots per load point; default max(5e6, ceil(50/eps^2)).
    #[serde(default)]
    pub horizon: Option<u64>,
    /// Slots for the limit chain; default equals the horizon of the
    /// smallest epsilon.
    #[serde(default)]
    pub limit_horizon: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    pub base_seed: u64,
    #[serde(default)]
    pub estimators: EstimatorConfig,
    #[serde(default)]
    pub smoothness_pilot: Option<SmoothnessPilot>,
    /// Warm-start queue state; zero by default.
    #[serde(default)]
    pub initial_q: Option<Vec<f64>>,
}

fn default_replications() -> u32 {
    1
}

impl SweepConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: SweepConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn dimension(&self) -> usize {
        self.lambda_star.len()
    }

    pub fn decision_means(&self) -> anyhow::Result<Vec<Vec<f64>>> {
        self.decisions()
            .map(|ds| ds.iter().map(|d| d.mean().to_vec()).collect())
    }

    pub fn decisions(&self) -> anyhow::Result<Vec<ServiceDecision>> {
        self.model
            .decisions
            .iter()
            .enumerate()
            .map(|(k, d)| {
                ServiceDecision::new(
                    d.outcomes
                        .iter()
                        .map(|o| Outcome {
                            service: o.service.clone(),
                            prob: o.prob,
                        })
                        .collect(),
                )
                .with_context(|| format!("decision {k}"))
            })
            .collect()
    }

    pub fn build_geometry(&self) -> anyhow::Result<RateRegionGeometry> {
        let means = self.decision_means()?;
        let geom = if let Some(gens) = &self.generators {
            RateRegionGeometry::build_with_generators(means, self.lambda_star.clone(), gens)?
        } else if let Some(nu) = &self.nu {
            RateRegionGeometry::build_with_generators(
                means,
                self.lambda_star.clone(),
                std::slice::from_ref(nu),
            )?
        } else {
            RateRegionGeometry::build(means, self.lambda_star.clone())?
        };
        Ok(geom)
    }

    /// Switch model with arrivals solved for the given mean.
    pub fn build_model(&self, target_mean: &[f64]) -> anyhow::Result<SwitchModel> {
        let arrivals = ArrivalFamily::from_mean(self.arrivals.a_max.clone(), target_mean)?;
        Ok(SwitchModel::new(
            self.decisions()?,
            self.model.gamma.clone(),
            arrivals,
            self.model.tie_break,
        )?)
    }

    /// Per-point horizon: queue scale grows like 1/eps and mixing like
    /// 1/eps^2, so the default keeps a wide margin over both.
    pub fn horizon_for(&self, epsilon: f64) -> u64 {
        self.horizon
            .unwrap_or_else(|| 5_000_000u64.max((50.0 / (epsilon * epsilon)).ceil() as u64))
    }

    pub fn limit_horizon(&self) -> u64 {
        self.limit_horizon
            .unwrap_or_else(|| self.horizon_for(*self.epsilons.last().unwrap_or(&1.0)))
    }

    pub fn burn_in_for(&self, horizon: u64) -> u64 {
        self.estimators
            .burn_in
            .unwrap_or_else(|| (horizon / 5).max(100_000))
    }
}

/// One resolved near-critical load point.
#[derive(Debug, Clone, Serialize)]
pub struct LoadPoint {
    pub epsilon: f64,
    pub lambda: Vec<f64>,
    pub horizon: u64,
    pub burn_in: u64,
}

/// Everything `validate` checks, with every violated invariant listed.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<String>,
    pub geometry: Option<GeometrySummary>,
    pub load_points: Vec<LoadPoint>,
}

/// Builds the geometry and resolves every load point, aggregating all
/// violations instead of stopping at the first.
pub fn validate_config(cfg: &SweepConfig) -> ValidationReport {
    let mut violations = Vec::new();
    let mut geometry = None;
    let mut load_points = Vec::new();

    if cfg.name.is_empty() {
        violations.push("name must be nonempty".into());
    }
    if cfg.replications == 0 {
        violations.push("replications must be >= 1".into());
    }
    if cfg.estimators.thin == 0 {
        violations.push("estimators.thin must be >= 1".into());
    }
    if cfg.estimators.smoothness_windows.contains(&0) {
        violations.push("smoothness windows must be >= 1".into());
    }
    if cfg.epsilons.is_empty() {
        violations.push("epsilon schedule is empty".into());
    }
    if cfg.epsilons.iter().any(|&e| !e.is_finite() || e <= 0.0) {
        violations.push(format!("epsilons must be positive: {:?}", cfg.epsilons));
    }
    if cfg.epsilons.windows(2).any(|w| w[0] <= w[1]) {
        violations.push(format!(
            "epsilons must be strictly decreasing: {:?}",
            cfg.epsilons
        ));
    }
    if let Some(q0) = &cfg.initial_q {
        if q0.len() != cfg.dimension() || q0.iter().any(|&x| !x.is_finite() || x < 0.0) {
            violations.push(format!("initial_q must be nonnegative of length {}", cfg.dimension()));
        }
    }

    // the model at the boundary mean checks gamma, distinct means, flow
    // coverage and a_max > s_max in one place
    match cfg.build_model(&cfg.lambda_star) {
        Ok(_) => {}
        Err(e) => violations.push(format!("model: {e:#}")),
    }

    match cfg.build_geometry() {
        Ok(geom) => {
            for &eps in &cfg.epsilons {
                match geom.heavy_traffic_point(eps) {
                    Ok(lambda) => {
                        // the shifted mean must stay solvable for arrivals
                        if let Err(e) = ArrivalFamily::from_mean(cfg.arrivals.a_max.clone(), &lambda)
                        {
                            violations.push(format!("epsilon {eps}: {e}"));
                        }
                        let horizon = cfg.horizon_for(eps);
                        let burn_in = cfg.burn_in_for(horizon);
                        if burn_in >= horizon {
                            violations.push(format!(
                                "epsilon {eps}: burn-in {burn_in} consumes the whole horizon {horizon}"
                            ));
                        }
                        load_points.push(LoadPoint {
                            epsilon: eps,
                            lambda,
                            horizon,
                            burn_in,
                        });
                    }
                    Err(e) => violations.push(format!("epsilon {eps}: {e}")),
                }
            }
            geometry = Some(geom.summary());
        }
        Err(e) => violations.push(format!("geometry: {e:#}")),
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
        geometry,
        load_points,
    }
}

/// Stable hash of the resolved configuration, used to guard resumed sweeps.
pub fn config_hash(cfg: &SweepConfig) -> u64 {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    crate::report::fnv1a64(canonical.as_bytes())
}
