//! The limiting queue-differential Markov chain: the scheduler restricts
//! itself to decisions whose means lie on the outer face, the choice depends
//! on the differential state alone, and the state advances by the projection
//! of the arrival-minus-service increment on the subspace orthogonal to the
//! normal cone. There is no queue floor and no wasted service; the state can
//! have components of any sign.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RateRegionGeometry;
use crate::linalg::dot;
use crate::switch::{substream, SwitchModel};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("no decision mean lies on the outer face")]
    EmptyFace,
    #[error("invalid chain setup: {0}")]
    ConfigInvalid(String),
}

/// One step of the differential chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRecord {
    pub t: u64,
    #[serde(rename = "k")]
    pub decision: usize,
    pub y: Vec<f64>,
    #[serde(rename = "s")]
    pub service: Vec<f64>,
    #[serde(rename = "a")]
    pub arrival: Vec<f64>,
}

/// Face-restricted MaxWeight driven by the differential state: the lowest
/// face-decision index maximizing the scalar product of the (embedded) state
/// with the decision mean.
///
/// The weight equals the scalar product of the state coordinates with the
/// subspace coordinates of the mean, so the argmax needs no embedding.
pub fn face_decide(
    y: &[f64],
    geom: &RateRegionGeometry,
    model: &SwitchModel,
) -> Result<usize, ChainError> {
    if geom.face_decisions().is_empty() {
        return Err(ChainError::EmptyFace);
    }
    let mut best = geom.face_decisions()[0];
    let mut best_w = f64::NEG_INFINITY;
    for &k in geom.face_decisions() {
        let w = dot(y, &geom.perp_coords(model.decisions()[k].mean()));
        if w > best_w {
            best_w = w;
            best = k;
        }
    }
    Ok(best)
}

/// State update: add the subspace projection of `gamma (a - s)`.
/// Increments parallel to the normal cone leave the state unchanged.
pub fn chain_step(
    y: &[f64],
    arrival: &[f64],
    service: &[f64],
    gamma: &[f64],
    geom: &RateRegionGeometry,
) -> Vec<f64> {
    let inc: Vec<f64> = gamma
        .iter()
        .zip(arrival.iter().zip(service))
        .map(|(&g, (&a, &s))| g * (a - s))
        .collect();
    let proj = geom.perp_coords(&inc);
    y.iter().zip(&proj).map(|(a, b)| a + b).collect()
}

/// Deterministic simulation of the differential chain.
pub struct ChainSim<'a> {
    model: &'a SwitchModel,
    geom: &'a RateRegionGeometry,
    face_means: Vec<(usize, Vec<f64>)>,
    y: Vec<f64>,
    t: u64,
    horizon: u64,
    rng_arrivals: ChaCha8Rng,
    rng_service: ChaCha8Rng,
}

/// Runs the chain for `horizon` steps from `y0` (zero by default).
///
/// The model must carry the limiting arrival family, i.e. its mean must be
/// the geometry's boundary load point.
pub fn run<'a>(
    model: &'a SwitchModel,
    geom: &'a RateRegionGeometry,
    horizon: u64,
    seed: u64,
    y0: Option<&[f64]>,
) -> Result<ChainSim<'a>, ChainError> {
    if horizon == 0 {
        return Err(ChainError::ConfigInvalid("horizon must be >= 1".into()));
    }
    if geom.face_decisions().is_empty() {
        return Err(ChainError::EmptyFace);
    }
    let lam = geom.lambda_star();
    if model.dimension() != geom.dimension()
        || model
            .arrivals()
            .mean()
            .iter()
            .zip(lam)
            .any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(ChainError::ConfigInvalid(
            "chain arrivals must use the limiting family at the boundary load point".into(),
        ));
    }
    let m = geom.perp_dim();
    let y = match y0 {
        Some(y0) => {
            if y0.len() != m || y0.iter().any(|v| !v.is_finite()) {
                return Err(ChainError::ConfigInvalid(format!(
                    "initial state must be finite of length {m}: {y0:?}"
                )));
            }
            y0.to_vec()
        }
        None => vec![0.0; m],
    };
    let face_means = geom
        .face_decisions()
        .iter()
        .map(|&k| (k, geom.perp_coords(model.decisions()[k].mean())))
        .collect();
    Ok(ChainSim {
        model,
        geom,
        face_means,
        y,
        t: 0,
        horizon,
        rng_arrivals: substream(seed, 1),
        rng_service: substream(seed, 2),
    })
}

impl<'a> ChainSim<'a> {
    pub fn state(&self) -> &[f64] {
        &self.y
    }

    fn decide(&self) -> usize {
        let mut best = self.face_means[0].0;
        let mut best_w = f64::NEG_INFINITY;
        for (k, mean_coords) in &self.face_means {
            let w = dot(&self.y, mean_coords);
            if w > best_w {
                best_w = w;
                best = *k;
            }
        }
        best
    }
}

impl<'a> Iterator for ChainSim<'a> {
    type Item = ChainRecord;

    fn next(&mut self) -> Option<ChainRecord> {
        if self.t >= self.horizon {
            return None;
        }
        let k = self.decide();
        let service = self.model.decisions()[k]
            .sample(&mut self.rng_service)
            .to_vec();
        let arrival = self.model.arrivals().sample(&mut self.rng_arrivals);
        let y_next = chain_step(&self.y, &arrival, &service, self.model.gamma(), self.geom);
        let rec = ChainRecord {
            t: self.t,
            decision: k,
            y: std::mem::replace(&mut self.y, y_next),
            service,
            arrival,
        };
        self.t += 1;
        Some(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::ArrivalFamily;
    use crate::geometry::tests::{three_flow, two_server};
    use crate::linalg::norm;
    use crate::switch::{ServiceDecision, TieBreak};

    fn limit_model_two_server() -> SwitchModel {
        let arr = ArrivalFamily::from_mean(vec![1.25, 1.25], &[0.5, 0.5]).unwrap();
        SwitchModel::new(
            vec![
                ServiceDecision::deterministic(vec![1.0, 0.0]).unwrap(),
                ServiceDecision::deterministic(vec![0.0, 1.0]).unwrap(),
            ],
            vec![1.0, 1.0],
            arr,
            TieBreak::LowestIndex,
        )
        .unwrap()
    }

    #[test]
    fn decide_by_sign_in_crp_fixture() {
        let geom = two_server();
        let model = limit_model_two_server();
        // y = a (1,-1)/sqrt(2) with a > 0 favors the first decision
        assert_eq!(face_decide(&[0.7], &geom, &model).unwrap(), 0);
        assert_eq!(face_decide(&[-0.7], &geom, &model).unwrap(), 1);
        // tie at zero goes to the lowest face index
        assert_eq!(face_decide(&[0.0], &geom, &model).unwrap(), 0);
    }

    #[test]
    fn dominated_decision_never_chosen() {
        let arr = ArrivalFamily::from_mean(vec![1.25, 1.25], &[0.5, 0.5]).unwrap();
        let model = SwitchModel::new(
            vec![
                ServiceDecision::deterministic(vec![1.0, 0.0]).unwrap(),
                ServiceDecision::deterministic(vec![0.0, 1.0]).unwrap(),
                ServiceDecision::deterministic(vec![0.4, 0.4]).unwrap(),
            ],
            vec![1.0, 1.0],
            arr,
            TieBreak::LowestIndex,
        )
        .unwrap();
        let geom = crate::geometry::RateRegionGeometry::build(
            model.decision_means(),
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(geom.face_decisions(), &[0, 1]);
        for a in [-3.0, -0.1, 0.0, 0.1, 3.0] {
            assert_ne!(face_decide(&[a], &geom, &model).unwrap(), 2);
        }
    }

    #[test]
    fn step_examples() {
        let geom = two_server();
        // increment (gamma a - gamma s) = (-0.4, 0.4): no component along the
        // normal, coordinate along (1,-1)/sqrt(2) is -0.4*sqrt(2)
        let y = chain_step(&[0.0], &[0.6, 0.4], &[1.0, 0.0], &[1.0, 1.0], &geom);
        assert!((y[0] + 0.4 * 2f64.sqrt()).abs() < 1e-12);

        // arrival equal to service: no movement
        let y = chain_step(&[0.3], &[0.5, 0.5], &[0.5, 0.5], &[1.0, 1.0], &geom);
        assert!((y[0] - 0.3).abs() < 1e-12);

        // increment parallel to the normal cone: no movement
        let y = chain_step(&[0.3], &[0.7, 0.7], &[0.2, 0.2], &[1.0, 1.0], &geom);
        assert!((y[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let geom = two_server();
        let model = limit_model_two_server();
        let a: Vec<_> = run(&model, &geom, 300, 13, None).unwrap().collect();
        let b: Vec<_> = run(&model, &geom, 300, 13, None).unwrap().collect();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.decision, y.decision);
            assert!(x.y.iter().zip(&y.y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn rejects_non_limiting_arrivals() {
        let geom = two_server();
        let arr = ArrivalFamily::from_mean(vec![1.25, 1.25], &[0.45, 0.45]).unwrap();
        let model = limit_model_two_server().with_arrivals(arr).unwrap();
        assert!(matches!(
            run(&model, &geom, 10, 1, None),
            Err(ChainError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn state_stays_in_subspace() {
        // re-embedding and projecting returns the state exactly
        let geom = three_flow();
        let arr = ArrivalFamily::from_mean(vec![1.25, 1.25, 1.25], &[0.5, 0.5, 1.0]).unwrap();
        let model = SwitchModel::new(
            vec![
                ServiceDecision::deterministic(vec![1.0, 0.0, 1.0]).unwrap(),
                ServiceDecision::deterministic(vec![0.0, 1.0, 1.0]).unwrap(),
            ],
            vec![1.0, 1.0, 1.0],
            arr,
            TieBreak::LowestIndex,
        )
        .unwrap();
        for rec in run(&model, &geom, 1000, 3, None).unwrap() {
            let ambient = geom.embed_perp(&rec.y);
            let back = geom.perp_coords(&ambient);
            for (a, b) in rec.y.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn face_drift_balances_in_steady_state() {
        // the mean projected increment over a long run is statistically zero
        let geom = two_server();
        let model = limit_model_two_server();
        let n = 200_000u64;
        let recs: Vec<_> = run(&model, &geom, n, 10, None).unwrap().collect();
        let first = recs.first().unwrap().y[0];
        let last_y = {
            let r = recs.last().unwrap();
            chain_step(&r.y, &r.arrival, &r.service, model.gamma(), &geom)[0]
        };
        // telescoping: sum of increments equals the net displacement
        let mean_inc = (last_y - first) / n as f64;
        assert!(mean_inc.abs() < 0.01, "mean increment {mean_inc}");
        assert!(recs.iter().map(|r| norm(&r.y)).sum::<f64>() / n as f64 > 0.0);

        // every chosen mean lies on the face, so the face value of the
        // time-averaged chosen mean is exact
        let nu = geom.nu_prime();
        let target = crate::linalg::dot(nu, geom.lambda_star());
        for r in recs.iter().take(1000) {
            let v = crate::linalg::dot(nu, model.decisions()[r.decision].mean());
            assert!((v - target).abs() <= 1e-12);
        }
    }
}
