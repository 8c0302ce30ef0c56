//! Facet enumeration for the rate region.
//!
//! The rate region is the set of nonnegative vectors dominated by a convex
//! combination of the decision mean vectors. It equals the convex hull of the
//! means together with every point obtained by zeroing a coordinate subset of
//! a mean (the "dropped vertices"), which keeps exact enumeration tractable
//! at the dimensions this crate supports.

use serde::Serialize;

use crate::linalg::{affine_rank, complement_basis, dot, normalized, orthonormal_span, sub};

use super::GEOM_TOL;

/// One supporting halfspace `normal . x <= offset` with a unit outer normal.
#[derive(Debug, Clone, Serialize)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Facet {
    /// Signed slack `offset - normal . x` (nonnegative inside).
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - dot(&self.normal, x)
    }

    pub fn is_active(&self, x: &[f64]) -> bool {
        self.slack(x).abs() <= GEOM_TOL * self.offset.abs().max(1.0)
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// All distinct points obtained by zeroing coordinate subsets of the means.
pub(crate) fn dropped_vertices(means: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = means[0].len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mu in means {
        for mask in 0..(1u32 << n) {
            let mut v = mu.clone();
            for (i, vi) in v.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    *vi = 0.0;
                }
            }
            if !out.iter().any(|w| same_point(w, &v)) {
                out.push(v);
            }
        }
    }
    out
}

fn bits(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// Outer facets of the rate region (the ones with nonnegative normals).
///
/// Candidate hyperplanes pass through a subset `T` of decision means and are
/// parallel to a complementary subset `J` of coordinate axes, |T| + |J| = N;
/// every outer facet arises this way because the region is the hull of the
/// dropped vertices. A candidate is kept only if it supports all means, has a
/// nonnegative normal, and carries N affinely independent dropped vertices.
pub(crate) fn outer_facets(means: &[Vec<f64>], verts: &[Vec<f64>]) -> Vec<Facet> {
    let n = means[0].len();
    let k = means.len();
    let mut found: Vec<Facet> = Vec::new();

    for t_mask in 1u32..(1 << k) {
        let t = bits(t_mask, k);
        if t.len() > n {
            continue;
        }
        let j_size = n - t.len();
        for j_mask in 0u32..(1 << n) {
            if j_mask.count_ones() as usize != j_size {
                continue;
            }
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
            for i in bits(j_mask, n) {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                rows.push(e);
            }
            for &a in &t[1..] {
                rows.push(sub(&means[a], &means[t[0]]));
            }
            let span = orthonormal_span(&rows, GEOM_TOL);
            if span.len() != n - 1 {
                continue;
            }
            let comp = complement_basis(&span, n, GEOM_TOL);
            if comp.len() != 1 {
                continue;
            }
            let mut g = comp.into_iter().next().unwrap();
            let support = |g: &[f64]| {
                means
                    .iter()
                    .map(|m| dot(g, m))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            // orient so the chosen means attain the maximum
            if support(&g) > dot(&g, &means[t[0]]) + GEOM_TOL {
                for gi in g.iter_mut() {
                    *gi = -*gi;
                }
                if support(&g) > dot(&g, &means[t[0]]) + GEOM_TOL {
                    continue;
                }
            }
            if g.iter().any(|&gi| gi < -GEOM_TOL) {
                continue;
            }
            for gi in g.iter_mut() {
                if gi.abs() <= GEOM_TOL {
                    *gi = 0.0;
                }
            }
            let g = match normalized(&g, GEOM_TOL) {
                Some(u) => u,
                None => continue,
            };
            let offset = support(&g);
            let scale = offset.abs().max(1.0);
            let on: Vec<Vec<f64>> = verts
                .iter()
                .filter(|v| (dot(&g, v) - offset).abs() <= GEOM_TOL * scale)
                .cloned()
                .collect();
            if on.len() < n || affine_rank(&on, GEOM_TOL) != n - 1 {
                continue;
            }
            if !found
                .iter()
                .any(|f| f.normal.iter().zip(&g).all(|(a, b)| (a - b).abs() <= GEOM_TOL))
            {
                found.push(Facet { normal: g, offset });
            }
        }
    }
    found
}

/// Facets of the convex hull of an explicit point set, by brute force over
/// affinely independent subsets of size `dim`. Exponential in the point
/// count; meant for the small point sets that arise here (outer-face
/// vertices, test fixtures).
pub(crate) fn point_set_facets(points: &[Vec<f64>], dim: usize) -> Vec<Facet> {
    let mut found: Vec<Facet> = Vec::new();
    if points.is_empty() || dim == 0 {
        return found;
    }
    let mut idx = vec![0usize; dim];
    subsets(points.len(), dim, &mut idx, 0, 0, &mut |sel| {
        let base = &points[sel[0]];
        let rows: Vec<Vec<f64>> = sel[1..].iter().map(|&i| sub(&points[i], base)).collect();
        let span = orthonormal_span(&rows, GEOM_TOL);
        if span.len() != dim - 1 {
            return;
        }
        let comp = complement_basis(&span, dim, GEOM_TOL);
        if comp.len() != 1 {
            return;
        }
        let mut g = comp.into_iter().next().unwrap();
        let h0 = dot(&g, base);
        let max = points
            .iter()
            .map(|p| dot(&g, p))
            .fold(f64::NEG_INFINITY, f64::max);
        let min = points
            .iter()
            .map(|p| dot(&g, p))
            .fold(f64::INFINITY, f64::min);
        let scale = h0.abs().max(1.0);
        let one_sided = if max <= h0 + GEOM_TOL * scale {
            true
        } else if min >= h0 - GEOM_TOL * scale {
            for gi in g.iter_mut() {
                *gi = -*gi;
            }
            true
        } else {
            false
        };
        if !one_sided {
            return;
        }
        let offset = points
            .iter()
            .map(|p| dot(&g, p))
            .fold(f64::NEG_INFINITY, f64::max);
        if !found
            .iter()
            .any(|f| f.normal.iter().zip(&g).all(|(a, b)| (a - b).abs() <= GEOM_TOL))
        {
            found.push(Facet { normal: g, offset });
        }
    });
    found
}

fn subsets(n: usize, k: usize, idx: &mut Vec<usize>, depth: usize, start: usize, f: &mut impl FnMut(&[usize])) {
    if depth == k {
        f(idx);
        return;
    }
    for i in start..n {
        idx[depth] = i;
        subsets(n, k, idx, depth + 1, i + 1, f);
    }
}
