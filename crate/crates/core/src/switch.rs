//! The generalized-switch state machine: a scheduler picks one of K service
//! decisions per slot by MaxWeight, the realized service is a random outcome
//! vector, and queues update with arrivals and wasted service.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrivals::ArrivalFamily;
use crate::geometry::RateRegionGeometry;

#[derive(Debug, Error)]
pub enum SwitchError {
    #[error("invalid switch configuration: {0}")]
    ConfigInvalid(String),
}

/// One possible realization of a service decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    pub service: Vec<f64>,
    pub prob: f64,
}

/// A scheduling choice: finitely many outcome vectors with probabilities and
/// the resulting mean service vector.
#[derive(Debug, Clone)]
pub struct ServiceDecision {
    outcomes: Vec<Outcome>,
    mean: Vec<f64>,
    // cumulative probabilities for inverse-CDF sampling
    cumulative: Vec<f64>,
}

impl ServiceDecision {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self, SwitchError> {
        if outcomes.is_empty() {
            return Err(SwitchError::ConfigInvalid("decision has no outcomes".into()));
        }
        let n = outcomes[0].service.len();
        if n == 0 {
            return Err(SwitchError::ConfigInvalid("empty service vector".into()));
        }
        let mut total = 0.0;
        let mut mean = vec![0.0; n];
        let mut cumulative = Vec::with_capacity(outcomes.len());
        for o in &outcomes {
            if o.service.len() != n {
                return Err(SwitchError::ConfigInvalid(
                    "outcome vectors have mixed lengths".into(),
                ));
            }
            if o.service.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(SwitchError::ConfigInvalid(format!(
                    "outcome service must be finite and nonnegative: {:?}",
                    o.service
                )));
            }
            if !(o.prob >= 0.0 && o.prob <= 1.0) {
                return Err(SwitchError::ConfigInvalid(format!(
                    "outcome probability {} outside [0, 1]",
                    o.prob
                )));
            }
            total += o.prob;
            cumulative.push(total);
            for (m, v) in mean.iter_mut().zip(&o.service) {
                *m += o.prob * v;
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(SwitchError::ConfigInvalid(format!(
                "outcome probabilities sum to {total}, expected 1"
            )));
        }
        if mean.iter().all(|&m| m == 0.0) {
            return Err(SwitchError::ConfigInvalid("decision mean is zero".into()));
        }
        Ok(Self {
            outcomes,
            mean,
            cumulative,
        })
    }

    /// Decision with a single deterministic outcome.
    pub fn deterministic(service: Vec<f64>) -> Result<Self, SwitchError> {
        Self::new(vec![Outcome {
            service,
            prob: 1.0,
        }])
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// Draws one outcome; independent of prior history given the stream.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[f64] {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.outcomes.len() - 1);
        &self.outcomes[idx].service
    }
}

/// Tie handling for the argmax over decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    UniformRandom,
}

/// Full switch description: decisions, weights, arrivals, tie rule.
#[derive(Debug, Clone)]
pub struct SwitchModel {
    decisions: Vec<ServiceDecision>,
    gamma: Vec<f64>,
    arrivals: ArrivalFamily,
    tie_break: TieBreak,
    s_max: Vec<f64>,
}

impl SwitchModel {
    pub fn new(
        decisions: Vec<ServiceDecision>,
        gamma: Vec<f64>,
        arrivals: ArrivalFamily,
        tie_break: TieBreak,
    ) -> Result<Self, SwitchError> {
        if decisions.is_empty() {
            return Err(SwitchError::ConfigInvalid("no service decisions".into()));
        }
        let n = gamma.len();
        if n == 0 || decisions.iter().any(|d| d.mean().len() != n) {
            return Err(SwitchError::ConfigInvalid(
                "decision dimensions do not match the weight vector".into(),
            ));
        }
        if gamma.iter().any(|&g| !g.is_finite() || g <= 0.0) {
            return Err(SwitchError::ConfigInvalid(format!(
                "weights must be strictly positive: {gamma:?}"
            )));
        }
        for a in 0..decisions.len() {
            for b in a + 1..decisions.len() {
                if decisions[a]
                    .mean()
                    .iter()
                    .zip(decisions[b].mean())
                    .all(|(x, y)| (x - y).abs() <= 1e-12)
                {
                    return Err(SwitchError::ConfigInvalid(format!(
                        "decisions {a} and {b} have identical means"
                    )));
                }
            }
        }
        for i in 0..n {
            if !decisions.iter().any(|d| d.mean()[i] > 0.0) {
                return Err(SwitchError::ConfigInvalid(format!(
                    "no decision serves flow {i}"
                )));
            }
        }
        if arrivals.dimension() != n {
            return Err(SwitchError::ConfigInvalid(
                "arrival dimension does not match the switch".into(),
            ));
        }
        let mut s_max = vec![0.0f64; n];
        for d in &decisions {
            for o in d.outcomes() {
                for (sm, &v) in s_max.iter_mut().zip(&o.service) {
                    *sm = sm.max(v);
                }
            }
        }
        for (i, (&am, &sm)) in arrivals.a_max().iter().zip(&s_max).enumerate() {
            if am <= sm {
                return Err(SwitchError::ConfigInvalid(format!(
                    "a_max must exceed the largest service outcome componentwise \
                     (flow {i}: a_max {am} vs s_max {sm})"
                )));
            }
        }
        Ok(Self {
            decisions,
            gamma,
            arrivals,
            tie_break,
            s_max,
        })
    }

    pub fn decisions(&self) -> &[ServiceDecision] {
        &self.decisions
    }

    pub fn decision_means(&self) -> Vec<Vec<f64>> {
        self.decisions.iter().map(|d| d.mean().to_vec()).collect()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn arrivals(&self) -> &ArrivalFamily {
        &self.arrivals
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    pub fn s_max(&self) -> &[f64] {
        &self.s_max
    }

    pub fn dimension(&self) -> usize {
        self.gamma.len()
    }

    /// Same switch with the arrival family swapped (e.g. another load point).
    pub fn with_arrivals(&self, arrivals: ArrivalFamily) -> Result<Self, SwitchError> {
        Self::new(
            self.decisions.clone(),
            self.gamma.clone(),
            arrivals,
            self.tie_break,
        )
    }
}

/// MaxWeight: lowest index maximizing the queue-weighted mean service rate
/// `(gamma q) . mu^l`.
pub fn maxweight_decide(q: &[f64], model: &SwitchModel) -> usize {
    let mut best = 0usize;
    let mut best_w = f64::NEG_INFINITY;
    for (l, d) in model.decisions.iter().enumerate() {
        let w = weighted_rate(q, &model.gamma, d.mean());
        if w > best_w {
            best_w = w;
            best = l;
        }
    }
    best
}

#[inline]
fn weighted_rate(q: &[f64], gamma: &[f64], mean: &[f64]) -> f64 {
    let mut w = 0.0;
    for i in 0..q.len() {
        w += gamma[i] * q[i] * mean[i];
    }
    w
}

/// Queue update for one slot: `q' = (q - s)^+ + a`, wasted service
/// `u = (s - q)^+`.
pub fn step(q: &[f64], s: &[f64], a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let q_next = q
        .iter()
        .zip(s)
        .zip(a)
        .map(|((&qi, &si), &ai)| (qi - si).max(0.0) + ai)
        .collect();
    let wasted = q
        .iter()
        .zip(s)
        .map(|(&qi, &si)| (si - qi).max(0.0))
        .collect();
    (q_next, wasted)
}

/// One simulated slot. The differential coordinates `y` are the projection of
/// the weighted queue vector on the subspace orthogonal to the normal cone,
/// expressed in the geometry's subspace basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: u64,
    #[serde(rename = "k")]
    pub decision: usize,
    #[serde(rename = "q")]
    pub q_before: Vec<f64>,
    #[serde(rename = "s")]
    pub service: Vec<f64>,
    #[serde(rename = "a")]
    pub arrival: Vec<f64>,
    #[serde(rename = "u")]
    pub wasted: Vec<f64>,
    #[serde(rename = "qn")]
    pub q_after: Vec<f64>,
    pub y: Vec<f64>,
}

/// Deterministic slot-by-slot simulation; a function of
/// `(model, geometry, seed, initial state)` only.
pub struct SwitchSim<'a> {
    model: &'a SwitchModel,
    geom: &'a RateRegionGeometry,
    q: Vec<f64>,
    gq: Vec<f64>,
    t: u64,
    horizon: u64,
    rng_arrivals: ChaCha8Rng,
    rng_service: ChaCha8Rng,
    rng_ties: ChaCha8Rng,
    ties_seen: u64,
}

/// Independent substream of a counter-based generator: same 64-bit seed,
/// distinct stream ids.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const STREAM_ARRIVALS: u64 = 1;
pub(crate) const STREAM_SERVICE: u64 = 2;
pub(crate) const STREAM_TIES: u64 = 3;

/// Runs the switch for `horizon` slots from `initial_q` (zero by default).
pub fn run<'a>(
    model: &'a SwitchModel,
    geom: &'a RateRegionGeometry,
    horizon: u64,
    seed: u64,
    initial_q: Option<&[f64]>,
) -> Result<SwitchSim<'a>, SwitchError> {
    if horizon == 0 {
        return Err(SwitchError::ConfigInvalid("horizon must be >= 1".into()));
    }
    if geom.dimension() != model.dimension() {
        return Err(SwitchError::ConfigInvalid(
            "geometry dimension does not match the model".into(),
        ));
    }
    let means = model.decision_means();
    if means.len() != geom.decision_means().len()
        || means.iter().zip(geom.decision_means()).any(|(a, b)| {
            a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-9)
        })
    {
        return Err(SwitchError::ConfigInvalid(
            "geometry was built from different decision means".into(),
        ));
    }
    let q = match initial_q {
        Some(q0) => {
            if q0.len() != model.dimension() || q0.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(SwitchError::ConfigInvalid(format!(
                    "initial queue state must be nonnegative of length {}: {q0:?}",
                    model.dimension()
                )));
            }
            q0.to_vec()
        }
        None => vec![0.0; model.dimension()],
    };
    Ok(SwitchSim {
        model,
        geom,
        q,
        gq: vec![0.0; model.dimension()],
        t: 0,
        horizon,
        rng_arrivals: substream(seed, STREAM_ARRIVALS),
        rng_service: substream(seed, STREAM_SERVICE),
        rng_ties: substream(seed, STREAM_TIES),
        ties_seen: 0,
    })
}

impl<'a> SwitchSim<'a> {
    /// Slots where the MaxWeight argmax was not unique.
    pub fn tie_count(&self) -> u64 {
        self.ties_seen
    }

    /// Current queue vector (the warm-start state for a continuation run).
    pub fn state(&self) -> &[f64] {
        &self.q
    }

    fn decide(&mut self) -> usize {
        let mut best = 0usize;
        let mut best_w = f64::NEG_INFINITY;
        let mut ties = 0usize;
        for (l, d) in self.model.decisions.iter().enumerate() {
            let w = weighted_rate(&self.q, &self.model.gamma, d.mean());
            if w > best_w {
                best_w = w;
                best = l;
                ties = 1;
            } else if w == best_w {
                ties += 1;
            }
        }
        if ties > 1 {
            self.ties_seen += 1;
            if self.model.tie_break == TieBreak::UniformRandom {
                let pick = self.rng_ties.random_range(0..ties);
                let mut seen = 0usize;
                for (l, d) in self.model.decisions.iter().enumerate() {
                    if weighted_rate(&self.q, &self.model.gamma, d.mean()) == best_w {
                        if seen == pick {
                            return l;
                        }
                        seen += 1;
                    }
                }
            }
        }
        best
    }
}

impl<'a> Iterator for SwitchSim<'a> {
    type Item = SlotRecord;

    fn next(&mut self) -> Option<SlotRecord> {
        if self.t >= self.horizon {
            return None;
        }
        let k = self.decide();
        let service = self.model.decisions[k].sample(&mut self.rng_service).to_vec();
        let arrival = self.model.arrivals.sample(&mut self.rng_arrivals);
        let (q_after, wasted) = step(&self.q, &service, &arrival);
        for i in 0..self.q.len() {
            self.gq[i] = self.model.gamma[i] * self.q[i];
        }
        let y = self.geom.perp_coords(&self.gq);
        let q_before = std::mem::replace(&mut self.q, q_after);
        let rec = SlotRecord {
            t: self.t,
            decision: k,
            q_before,
            service,
            arrival,
            wasted,
            q_after: self.q.clone(),
            y,
        };
        self.t += 1;
        Some(rec)
    }
}
