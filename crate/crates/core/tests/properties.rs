//! Property tests for the geometric invariants and the queue update.

use std::sync::OnceLock;

use proptest::prelude::*;
use switchsim_core::arrivals::ArrivalFamily;
use switchsim_core::estimators::smoothness_gap;
use switchsim_core::geometry::{project_ray, RateRegionGeometry};
use switchsim_core::linalg::{dot, norm, sub};
use switchsim_core::switch::step;

fn crp_geom() -> &'static RateRegionGeometry {
    static G: OnceLock<RateRegionGeometry> = OnceLock::new();
    G.get_or_init(|| {
        RateRegionGeometry::build(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap()
    })
}

fn cone_geoms() -> &'static Vec<RateRegionGeometry> {
    static G: OnceLock<Vec<RateRegionGeometry>> = OnceLock::new();
    G.get_or_init(|| {
        vec![
            RateRegionGeometry::build(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5])
                .unwrap(),
            RateRegionGeometry::build(
                vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]],
                vec![0.5, 0.5, 1.0],
            )
            .unwrap(),
            RateRegionGeometry::build(
                vec![vec![2.0, 0.0], vec![2.0 / 3.0, 2.0 / 3.0], vec![0.0, 0.9]],
                vec![2.0 / 3.0, 2.0 / 3.0],
            )
            .unwrap(),
            RateRegionGeometry::build(vec![vec![1.0, 0.5], vec![0.5, 1.0]], vec![1.0, 0.5])
                .unwrap(),
        ]
    })
}

fn vec_in(dim: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, dim)
}

proptest! {
    #[test]
    fn ray_projection_pythagoras(x in vec_in(2, -10.0, 10.0)) {
        let nu = &crp_geom().cone_generators()[0];
        let (star, perp) = project_ray(&x, nu);
        let lhs = norm(&x).powi(2);
        let rhs = norm(&star).powi(2) + norm(&perp).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-9);
        // the two parts are orthogonal and recompose x
        prop_assert!(dot(&star, &perp).abs() <= 1e-9);
        for i in 0..2 {
            prop_assert!((star[i] + perp[i] - x[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn cone_projection_invariants(case in 0usize..4, raw in vec_in(3, -10.0, 10.0)) {
        let geom = &cone_geoms()[case];
        let x = &raw[..geom.dimension()];
        let p = geom.project_cone(x);
        // idempotence
        let pp = geom.project_cone(&p);
        prop_assert!(norm(&sub(&pp, &p)) <= 1e-9);
        // KKT: residual orthogonal to the projection, anti-correlated with
        // every generator
        let r = sub(x, &p);
        prop_assert!(dot(&r, &p).abs() <= 1e-9 * norm(x).max(1.0));
        for g in geom.cone_generators() {
            prop_assert!(dot(&r, g) <= 1e-9);
        }
    }

    #[test]
    fn subspace_projection_invariants(case in 0usize..4, raw in vec_in(3, -10.0, 10.0)) {
        let geom = &cone_geoms()[case];
        let x = &raw[..geom.dimension()];
        let sp = geom.project_perp_sp(x);
        // idempotence
        let sp2 = geom.project_perp_sp(&sp);
        prop_assert!(norm(&sub(&sp2, &sp)) <= 1e-9);
        // never longer than the cone residual
        let residual = sub(x, &geom.project_cone(x));
        prop_assert!(norm(&sp) <= norm(&residual) + 1e-9);
    }

    #[test]
    fn interior_cone_projection_residual_is_subspace_projection(
        case in 0usize..4,
        raw in vec_in(3, -10.0, 10.0),
    ) {
        let geom = &cone_geoms()[case];
        let x = &raw[..geom.dimension()];
        // Gate on the distance to the full relative boundary (no
        // orthant-facet exclusion): only there does the cone residual live in
        // the orthogonal subspace.
        if unexcluded_interior_distance(geom, x) > 1e-6 {
            let residual = sub(x, &geom.project_cone(x));
            let sp = geom.project_perp_sp(x);
            prop_assert!(norm(&sub(&residual, &sp)) <= 1e-6);
        }
    }

    #[test]
    fn queue_update_identities(
        q in vec_in(3, 0.0, 50.0),
        s in vec_in(3, 0.0, 5.0),
        a in vec_in(3, 0.0, 5.0),
    ) {
        let (q_next, u) = step(&q, &s, &a);
        for i in 0..3 {
            prop_assert!((q_next[i] - q[i] - a[i] + s[i] - u[i]).abs() <= 1e-12);
            prop_assert!(q_next[i] >= 0.0 && u[i] >= 0.0);
            if u[i] > 0.0 {
                prop_assert!(q[i] < s[i]);
                prop_assert_eq!(q_next[i], a[i]);
            }
        }
    }

    #[test]
    fn inverse_cdf_round_trip(u in 0.0f64..1.0, mean_frac in 0.05f64..0.95) {
        let a_max = 1.25f64;
        let fam = ArrivalFamily::from_mean(vec![a_max], &[mean_frac * a_max]).unwrap();
        let x = fam.inverse_cdf(0, u);
        prop_assert!((0.0..=a_max).contains(&x));
        prop_assert!((fam.cdf(0, x) - u).abs() <= 1e-12);
    }

    #[test]
    fn smoothness_gap_antitone_under_window_refinement(
        bits in prop::collection::vec(prop::bool::ANY, 512),
    ) {
        let services: Vec<Vec<f64>> = bits
            .iter()
            .map(|&b| vec![if b { 1.0 } else { 0.0 }])
            .collect();
        let mut prev = f64::INFINITY;
        for w in [4usize, 8, 16, 32] {
            let g = smoothness_gap(services.iter().cloned(), w).unwrap()[0];
            prop_assert!(g <= prev + 1e-15);
            prev = g;
        }
    }
}

/// Distance from the cone projection of `x` to the full relative boundary of
/// the cone (every facet counted). The fixtures have at most two generators,
/// where the facets are the apex (d = 1) or the generator rays (d = 2).
fn unexcluded_interior_distance(geom: &RateRegionGeometry, x: &[f64]) -> f64 {
    let p = geom.project_cone(x);
    let gens = geom.cone_generators();
    if geom.cone_dim() == 1 {
        return norm(&p);
    }
    assert_eq!(gens.len(), 2);
    gens.iter()
        .map(|g| {
            let c = dot(&p, g).max(0.0);
            let on_ray: Vec<f64> = g.iter().map(|gi| gi * c).collect();
            norm(&sub(&p, &on_ray))
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn generators_support_region_at_tolerance() {
    for geom in cone_geoms() {
        for g in geom.cone_generators() {
            let at_star = dot(g, geom.lambda_star());
            for m in geom.decision_means() {
                assert!(dot(g, m) <= at_star + 1e-9);
            }
        }
    }
}

#[test]
fn perp_basis_is_orthonormal_and_orthogonal_to_cone() {
    for geom in cone_geoms() {
        let basis = geom.perp_basis();
        assert_eq!(basis.len(), geom.dimension() - geom.cone_dim());
        for (i, b) in basis.iter().enumerate() {
            assert!((norm(b) - 1.0).abs() <= 1e-12);
            for other in &basis[i + 1..] {
                assert!(dot(b, other).abs() <= 1e-12);
            }
            for g in geom.cone_generators() {
                assert!(dot(b, g).abs() <= 1e-9);
            }
        }
    }
}
