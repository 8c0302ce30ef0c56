//! Rate-region geometry for a generalized switch: outer facets, the normal
//! cone at a maximal boundary load point, and the projections driving the
//! queue-differential analysis.
//!
//! The region is `V = { x >= 0 : x <= sum_k psi_k mu^k, psi in the simplex }`
//! for the decision mean vectors `mu^k`. Given a strictly positive maximal
//! boundary point, this module identifies the facets through it, the cone
//! they generate, a positive unit vector in the cone's relative interior, an
//! orthonormal basis of the orthogonal subspace, and the margin from the load
//! point to the relative boundary of the outer face.

mod facets;

pub use facets::Facet;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    axpy, complement_basis, dot, least_squares_coeffs, norm, normalized, orthonormal_span, scaled,
    sub,
};

/// Absolute tolerance for geometric equality tests; inputs are O(1) rationals.
pub const GEOM_TOL: f64 = 1e-9;

/// Largest supported number of flows. Facet enumeration is exact but
/// exponential in the dimension.
pub const MAX_DIMENSION: usize = 6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension {0} exceeds the supported maximum of {MAX_DIMENSION}")]
    DimensionTooLarge(usize),
    #[error("invalid geometry input: {0}")]
    InvalidInput(String),
    #[error("load point is not maximal: dominated by {dominating:?}")]
    NotMaximal { dominating: Vec<f64> },
    #[error("load point is not on the outer boundary: {0}")]
    NotOnBoundary(String),
    #[error("load point lies on the relative boundary of the outer face")]
    DegenerateFace,
    #[error("heavy-traffic load point invalid: {0}")]
    LoadPointInvalid(String),
    #[error("supplied cone data failed verification: {0}")]
    BadOverride(String),
}

/// Geometry of the rate region around a maximal boundary load point.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone)]
pub struct RateRegionGeometry {
    dimension: usize,
    decision_means: Vec<Vec<f64>>,
    facets: Vec<Facet>,
    facets_complete: bool,
    lambda_star: Vec<f64>,
    face_decisions: Vec<usize>,
    cone_generators: Vec<Vec<f64>>,
    cone_span: Vec<Vec<f64>>,
    nu_prime: Vec<f64>,
    perp_basis: Vec<Vec<f64>>,
    delta_margin: f64,
}

/// Serializable snapshot of a built geometry (the `geometry.json` document).
#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub dimension: usize,
    pub crp: bool,
    pub cone_dim: usize,
    pub lambda_star: Vec<f64>,
    pub facets: Vec<Facet>,
    pub facets_complete: bool,
    pub face_decisions: Vec<usize>,
    pub cone_generators: Vec<Vec<f64>>,
    pub nu_prime: Vec<f64>,
    pub perp_basis: Vec<Vec<f64>>,
    pub delta_margin: f64,
}

/// Orthogonal split of `x` along a unit direction: `((x.nu) nu, x - (x.nu) nu)`.
pub fn project_ray(x: &[f64], nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert!((norm(nu) - 1.0).abs() <= 1e-9);
    let c = dot(x, nu);
    let star = scaled(nu, c);
    let perp = sub(x, &star);
    (star, perp)
}

impl RateRegionGeometry {
    /// Builds the geometry from the decision means and the target load point.
    ///
    /// Enumerates the facets of the region, verifies that `lambda_star` is a
    /// strictly positive maximal boundary point, and derives the normal cone
    /// and projection data.
    pub fn build(
        decision_means: Vec<Vec<f64>>,
        lambda_star: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        validate_inputs(&decision_means, &lambda_star)?;
        let n = lambda_star.len();
        let verts = facets::dropped_vertices(&decision_means);
        let mut all = facets::outer_facets(&decision_means, &verts);
        // The region has full dimension (it contains a positive simplex), so
        // every coordinate plane is a facet.
        for i in 0..n {
            let mut normal = vec![0.0; n];
            normal[i] = -1.0;
            all.push(Facet { normal, offset: 0.0 });
        }
        Self::finish(decision_means, lambda_star, all, true, None, &verts)
    }

    /// Builds the geometry from user-supplied cone generators (or a single
    /// normal in the one-dimensional case), verifying them against the means
    /// instead of enumerating facets.
    pub fn build_with_generators(
        decision_means: Vec<Vec<f64>>,
        lambda_star: Vec<f64>,
        generators: &[Vec<f64>],
    ) -> Result<Self, GeometryError> {
        validate_inputs(&decision_means, &lambda_star)?;
        let n = lambda_star.len();
        if generators.is_empty() {
            return Err(GeometryError::BadOverride("no generators supplied".into()));
        }
        let mut gens = Vec::with_capacity(generators.len());
        for g in generators {
            if g.len() != n {
                return Err(GeometryError::BadOverride(format!(
                    "generator length {} does not match dimension {n}",
                    g.len()
                )));
            }
            let u = normalized(g, GEOM_TOL)
                .ok_or_else(|| GeometryError::BadOverride("zero generator".into()))?;
            if u.iter().any(|&x| x < -GEOM_TOL) {
                return Err(GeometryError::BadOverride(format!(
                    "generator {g:?} has a negative component"
                )));
            }
            let at_star = dot(&u, &lambda_star);
            let support = decision_means
                .iter()
                .map(|m| dot(&u, m))
                .fold(f64::NEG_INFINITY, f64::max);
            if (support - at_star).abs() > GEOM_TOL * support.abs().max(1.0) {
                return Err(GeometryError::BadOverride(format!(
                    "generator {g:?} does not support the region at the load point \
                     (support {support}, value {at_star})"
                )));
            }
            gens.push(u);
        }
        let verts = facets::dropped_vertices(&decision_means);
        let mut all: Vec<Facet> = gens
            .iter()
            .map(|g| Facet {
                normal: g.clone(),
                offset: dot(g, &lambda_star),
            })
            .collect();
        for i in 0..n {
            let mut normal = vec![0.0; n];
            normal[i] = -1.0;
            all.push(Facet { normal, offset: 0.0 });
        }
        Self::finish(decision_means, lambda_star, all, false, Some(gens), &verts)
    }

    fn finish(
        decision_means: Vec<Vec<f64>>,
        lambda_star: Vec<f64>,
        all_facets: Vec<Facet>,
        facets_complete: bool,
        given_generators: Option<Vec<Vec<f64>>>,
        verts: &[Vec<f64>],
    ) -> Result<Self, GeometryError> {
        let n = lambda_star.len();

        for f in &all_facets {
            if f.slack(&lambda_star) < -GEOM_TOL * f.offset.abs().max(1.0) {
                return Err(GeometryError::NotOnBoundary(format!(
                    "point violates facet {:?} <= {}",
                    f.normal, f.offset
                )));
            }
        }

        let cone_generators = match given_generators {
            Some(g) => g,
            None => all_facets
                .iter()
                .filter(|f| f.normal.iter().all(|&x| x >= 0.0) && f.is_active(&lambda_star))
                .map(|f| f.normal.clone())
                .collect(),
        };

        // Maximality: some active outer normal must be positive in every
        // coordinate direction, otherwise the load point can be pushed along
        // the uncovered axis while staying in the region.
        for i in 0..n {
            if cone_generators.iter().any(|g| g[i] > GEOM_TOL) {
                continue;
            }
            let mut t = f64::INFINITY;
            for f in &all_facets {
                if f.normal[i] > GEOM_TOL {
                    t = t.min(f.slack(&lambda_star) / f.normal[i]);
                }
            }
            let mut dominating = lambda_star.clone();
            dominating[i] += if t.is_finite() { t } else { 1.0 };
            return Err(GeometryError::NotMaximal { dominating });
        }

        let cone_span = orthonormal_span(&cone_generators, GEOM_TOL);
        let sum = cone_generators.iter().fold(vec![0.0; n], |mut acc, g| {
            axpy(&mut acc, 1.0, g);
            acc
        });
        let nu_prime = normalized(&sum, GEOM_TOL)
            .ok_or_else(|| GeometryError::InvalidInput("degenerate normal cone".into()))?;
        debug_assert!(nu_prime.iter().all(|&x| x > 0.0));
        let perp_basis = complement_basis(&cone_span, n, GEOM_TOL);

        let face_value = dot(&nu_prime, &lambda_star);
        let scale = face_value.abs().max(1.0);
        let face_decisions: Vec<usize> = decision_means
            .iter()
            .enumerate()
            .filter(|(_, m)| dot(&nu_prime, m) >= face_value - GEOM_TOL * scale)
            .map(|(k, _)| k)
            .collect();

        let delta_margin = if facets_complete {
            margin_from_facets(&all_facets, &lambda_star, &perp_basis)
        } else {
            margin_from_face_vertices(verts, &lambda_star, &nu_prime, &perp_basis)
        };
        if delta_margin <= GEOM_TOL {
            return Err(GeometryError::DegenerateFace);
        }

        Ok(Self {
            dimension: n,
            decision_means,
            facets: all_facets,
            facets_complete,
            lambda_star,
            face_decisions,
            cone_generators,
            cone_span,
            nu_prime,
            perp_basis,
            delta_margin,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn decision_means(&self) -> &[Vec<f64>] {
        &self.decision_means
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn lambda_star(&self) -> &[f64] {
        &self.lambda_star
    }

    /// Indices of the decisions whose means lie on the outer face.
    pub fn face_decisions(&self) -> &[usize] {
        &self.face_decisions
    }

    pub fn cone_generators(&self) -> &[Vec<f64>] {
        &self.cone_generators
    }

    /// Dimension `d` of the normal cone at the load point.
    pub fn cone_dim(&self) -> usize {
        self.cone_span.len()
    }

    /// Complete resource pooling: the normal cone is a single ray.
    pub fn is_crp(&self) -> bool {
        self.cone_dim() == 1
    }

    /// Positive unit vector in the relative interior of the normal cone
    /// (equals the unique outer normal in the one-dimensional case).
    pub fn nu_prime(&self) -> &[f64] {
        &self.nu_prime
    }

    /// Orthonormal basis of the subspace orthogonal to the normal cone.
    pub fn perp_basis(&self) -> &[Vec<f64>] {
        &self.perp_basis
    }

    /// Dimension of the orthogonal subspace (`N - d`).
    pub fn perp_dim(&self) -> usize {
        self.perp_basis.len()
    }

    /// Distance from the load point to the relative boundary of the outer face.
    pub fn face_margin(&self) -> f64 {
        self.delta_margin
    }

    /// Coordinates of the orthogonal-subspace projection of `x` in the basis
    /// returned by [`perp_basis`](Self::perp_basis).
    pub fn perp_coords(&self, x: &[f64]) -> Vec<f64> {
        self.perp_basis.iter().map(|b| dot(x, b)).collect()
    }

    /// Embeds subspace coordinates back into the ambient space.
    pub fn embed_perp(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for (c, b) in y.iter().zip(&self.perp_basis) {
            axpy(&mut out, *c, b);
        }
        out
    }

    /// Orthogonal projection of `x` on the subspace orthogonal to the cone.
    pub fn project_perp_sp(&self, x: &[f64]) -> Vec<f64> {
        self.embed_perp(&self.perp_coords(x))
    }

    /// Euclidean projection of `x` on the normal cone.
    ///
    /// Active-set enumeration over generator subsets: for each subset solve
    /// the unconstrained least squares and accept the first solution with
    /// nonnegative coefficients whose residual satisfies the cone optimality
    /// conditions. Exact up to tolerance; the generator count is tiny.
    pub fn project_cone(&self, x: &[f64]) -> Vec<f64> {
        let gens = &self.cone_generators;
        let m = gens.len();
        let scale = GEOM_TOL * norm(x).max(1.0);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for size in 0..=m {
            for mask in 0u32..(1 << m) {
                if mask.count_ones() as usize != size {
                    continue;
                }
                let sel: Vec<&[f64]> = (0..m)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| gens[i].as_slice())
                    .collect();
                let coeffs = match least_squares_coeffs(&sel, x, 1e-12) {
                    Some(c) => c,
                    None => continue,
                };
                if coeffs.iter().any(|&c| c < -GEOM_TOL) {
                    continue;
                }
                let mut p = vec![0.0; self.dimension];
                for (c, g) in coeffs.iter().zip(&sel) {
                    axpy(&mut p, c.max(0.0), g);
                }
                let r = sub(x, &p);
                let violation = gens
                    .iter()
                    .map(|g| dot(&r, g))
                    .fold(f64::NEG_INFINITY, f64::max);
                if violation <= scale {
                    return p;
                }
                if best.as_ref().is_none_or(|(v, _)| violation < *v) {
                    best = Some((violation, p));
                }
            }
        }
        // Numerically a KKT point always exists among the subsets; keep the
        // least-violating candidate if rounding hid it.
        best.expect("cone projection always has a candidate").1
    }

    /// Distance from the cone projection of `x` to the relative boundary of
    /// the normal cone. For a one-dimensional cone this is the norm of the
    /// projection (the boundary is the apex).
    ///
    /// Cone facets that coincide with a facet of the positive orthant (only
    /// possible when the cone is full-dimensional) are not counted as
    /// relative boundary.
    pub fn rel_boundary_distance(&self, x: &[f64]) -> f64 {
        let p = self.project_cone(x);
        let d = self.cone_dim();
        if d == 1 {
            return norm(&p);
        }
        // work in cone-span coordinates
        let gens_c: Vec<Vec<f64>> = self
            .cone_generators
            .iter()
            .map(|g| self.cone_span.iter().map(|u| dot(g, u)).collect())
            .collect();
        let p_c: Vec<f64> = self.cone_span.iter().map(|u| dot(&p, u)).collect();
        let m = gens_c.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != d - 1 {
                continue;
            }
            let sel: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let rows: Vec<Vec<f64>> = sel.iter().map(|&i| gens_c[i].clone()).collect();
            let span = orthonormal_span(&rows, GEOM_TOL);
            if span.len() != d - 1 {
                continue;
            }
            let comp = complement_basis(&span, d, GEOM_TOL);
            if comp.len() != 1 {
                continue;
            }
            let mut w = comp.into_iter().next().unwrap();
            let max_side = |w: &[f64]| {
                gens_c
                    .iter()
                    .map(|g| dot(w, g))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            if max_side(&w) > GEOM_TOL {
                for wi in w.iter_mut() {
                    *wi = -*wi;
                }
                if max_side(&w) > GEOM_TOL {
                    continue;
                }
            }
            if d == self.dimension {
                let coincides_with_orthant = (0..self.dimension).any(|i| {
                    sel.iter().all(|&gi| self.cone_generators[gi][i].abs() <= GEOM_TOL)
                });
                if coincides_with_orthant {
                    continue;
                }
            }
            best = best.min((-dot(&w, &p_c)).max(0.0));
        }
        best
    }

    /// The near-critical load point `lambda_star - epsilon * nu_prime`,
    /// validated strictly positive and interior to the region.
    pub fn heavy_traffic_point(&self, epsilon: f64) -> Result<Vec<f64>, GeometryError> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(GeometryError::LoadPointInvalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let mut lam = self.lambda_star.clone();
        axpy(&mut lam, -epsilon, &self.nu_prime);
        if lam.iter().any(|&x| x <= GEOM_TOL) {
            return Err(GeometryError::LoadPointInvalid(format!(
                "epsilon {epsilon} pushes the load point out of the positive orthant: {lam:?}"
            )));
        }
        if !self.is_interior(&lam) {
            return Err(GeometryError::LoadPointInvalid(format!(
                "load point {lam:?} is not interior to the rate region"
            )));
        }
        Ok(lam)
    }

    /// Membership test against the known facets.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v >= -GEOM_TOL)
            && self
                .facets
                .iter()
                .all(|f| f.slack(x) >= -GEOM_TOL * f.offset.abs().max(1.0))
    }

    /// Strict interior test against the known facets.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v > GEOM_TOL)
            && self
                .facets
                .iter()
                .all(|f| f.slack(x) > GEOM_TOL * f.offset.abs().max(1.0))
    }

    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            dimension: self.dimension,
            crp: self.is_crp(),
            cone_dim: self.cone_dim(),
            lambda_star: self.lambda_star.clone(),
            facets: self.facets.clone(),
            facets_complete: self.facets_complete,
            face_decisions: self.face_decisions.clone(),
            cone_generators: self.cone_generators.clone(),
            nu_prime: self.nu_prime.clone(),
            perp_basis: self.perp_basis.clone(),
            delta_margin: self.delta_margin,
        }
    }
}

fn validate_inputs(means: &[Vec<f64>], lambda_star: &[f64]) -> Result<(), GeometryError> {
    let n = lambda_star.len();
    if n == 0 {
        return Err(GeometryError::InvalidInput("empty load point".into()));
    }
    if n > MAX_DIMENSION {
        return Err(GeometryError::DimensionTooLarge(n));
    }
    if means.is_empty() {
        return Err(GeometryError::InvalidInput("no decision means".into()));
    }
    for (k, m) in means.iter().enumerate() {
        if m.len() != n {
            return Err(GeometryError::InvalidInput(format!(
                "mean {k} has length {} but dimension is {n}",
                m.len()
            )));
        }
        if m.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(GeometryError::InvalidInput(format!(
                "mean {k} must be finite and nonnegative: {m:?}"
            )));
        }
        if m.iter().all(|&x| x == 0.0) {
            return Err(GeometryError::InvalidInput(format!("mean {k} is zero")));
        }
    }
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            if means[a]
                .iter()
                .zip(&means[b])
                .all(|(x, y)| (x - y).abs() <= 1e-12)
            {
                return Err(GeometryError::InvalidInput(format!(
                    "means {a} and {b} coincide"
                )));
            }
        }
    }
    for i in 0..n {
        if !means.iter().any(|m| m[i] > 0.0) {
            return Err(GeometryError::InvalidInput(format!(
                "no decision serves flow {i}"
            )));
        }
    }
    if lambda_star.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(GeometryError::InvalidInput(format!(
            "load point must be strictly positive: {lambda_star:?}"
        )));
    }
    Ok(())
}

/// Distance from the load point to the relative boundary of the outer face,
/// via halfspace slacks projected on the face's affine hull.
fn margin_from_facets(all: &[Facet], lambda_star: &[f64], perp_basis: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for f in all {
        let mut proj = vec![0.0; lambda_star.len()];
        for b in perp_basis {
            axpy(&mut proj, dot(&f.normal, b), b);
        }
        let np = norm(&proj);
        if np <= GEOM_TOL {
            continue;
        }
        best = best.min(f.slack(lambda_star).max(0.0) / np);
    }
    best
}

/// Margin computed from the outer-face vertex set alone (used when facets
/// were not enumerated): facets of the face polytope in subspace coordinates.
fn margin_from_face_vertices(
    verts: &[Vec<f64>],
    lambda_star: &[f64],
    nu_prime: &[f64],
    perp_basis: &[Vec<f64>],
) -> f64 {
    let m = perp_basis.len();
    if m == 0 {
        return f64::INFINITY;
    }
    let face_value = dot(nu_prime, lambda_star);
    let scale = face_value.abs().max(1.0);
    let coords: Vec<Vec<f64>> = verts
        .iter()
        .filter(|v| (dot(nu_prime, v) - face_value).abs() <= GEOM_TOL * scale)
        .map(|v| {
            let rel = sub(v, lambda_star);
            perp_basis.iter().map(|b| dot(&rel, b)).collect()
        })
        .collect();
    let fs = facets::point_set_facets(&coords, m);
    let mut best = f64::INFINITY;
    for f in fs {
        best = best.min(f.offset.max(0.0));
    }
    best
}
