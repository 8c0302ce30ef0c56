//! Small dense vector helpers for the low dimensions (N <= 6) this crate
//! supports. Everything works on plain `f64` slices; nothing here needs BLAS.

/// Scalar product of two equally sized slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`, in place.
#[inline]
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Unit vector in the direction of `a`, or `None` when `norm(a) <= tol`.
pub fn normalized(a: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = norm(a);
    if n <= tol {
        None
    } else {
        Some(scaled(a, 1.0 / n))
    }
}

/// Orthonormal basis of the span of `rows` (modified Gram-Schmidt with one
/// re-orthogonalization pass). Vectors with residual norm <= `tol` are
/// treated as dependent and skipped.
pub fn orthonormal_span(rows: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        if let Some(u) = residual_unit(r, &basis, tol) {
            basis.push(u);
        }
    }
    basis
}

/// Component of `v` orthogonal to the orthonormal `basis`, normalized;
/// `None` if `v` lies in the span at tolerance `tol`.
pub fn residual_unit(v: &[f64], basis: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let mut w = v.to_vec();
    for b in basis {
        let c = dot(&w, b);
        axpy(&mut w, -c, b);
    }
    // second pass removes the rounding left by the first
    for b in basis {
        let c = dot(&w, b);
        axpy(&mut w, -c, b);
    }
    normalized(&w, tol)
}

/// Orthonormal basis of the orthogonal complement of `span` in `R^dim`.
/// `span` must itself be orthonormal. Deterministic: candidates are the
/// standard basis vectors in coordinate order.
pub fn complement_basis(span: &[Vec<f64>], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut all = span.to_vec();
    let mut out = Vec::new();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        if let Some(u) = residual_unit(&e, &all, tol) {
            all.push(u.clone());
            out.push(u);
        }
    }
    out
}

/// Dimension of the affine hull of a point set (0 for a single point).
pub fn affine_rank(points: &[Vec<f64>], tol: f64) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let p0 = &points[0];
    let diffs: Vec<Vec<f64>> = points[1..].iter().map(|p| sub(p, p0)).collect();
    orthonormal_span(&diffs, tol).len()
}

/// Solves the square system `m x = rhs` by Gaussian elimination with partial
/// pivoting; `None` when a pivot falls below `tol`.
pub fn solve(m: &[Vec<f64>], rhs: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = rhs.len();
    debug_assert!(m.len() == n && m.iter().all(|r| r.len() == n));
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if piv_abs <= tol {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (pivot_rows, rest) = a.split_at_mut(r);
            let pivot = &pivot_rows[col];
            for (x, p) in rest[0].iter_mut().zip(pivot).skip(col) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col][c] * x[c];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Coefficients minimizing `|| x - sum_i c_i v_i ||` via the normal
/// equations; `None` when the Gram matrix is singular at `tol`.
pub fn least_squares_coeffs(vs: &[&[f64]], x: &[f64], tol: f64) -> Option<Vec<f64>> {
    let k = vs.len();
    if k == 0 {
        return Some(Vec::new());
    }
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(vs[i], vs[j])).collect())
        .collect();
    let rhs: Vec<f64> = (0..k).map(|i| dot(vs[i], x)).collect();
    solve(&gram, &rhs, tol)
}
