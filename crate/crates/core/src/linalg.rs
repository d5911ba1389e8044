//! Dense complex linear algebra shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Default comparison tolerance for real and complex quantities.
pub const DEFAULT_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Mixed absolute/relative comparison: `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn approx_eq_c(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * 1f64.max(a.norm()).max(b.norm())
}

/// Hilbert–Schmidt inner product `tr(a^* b)`, antilinear in `a`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part `(a + a^*)/2`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let h = (a + a.adjoint()) * real(0.5);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}

/// Eigen-decomposition of the Hermitian part: `(eigenvalues, eigenvectors as columns)`.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let h = (a + a.adjoint()) * real(0.5);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

pub fn min_hermitian_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).first().cloned().unwrap_or(0.0)
}

/// Orthonormal basis (Hilbert–Schmidt) of the span of `spanning`.
/// Vectors negligible against the largest input, or whose residual falls
/// below `tol` relative to their norm, are dropped.
pub fn orthonormalize(spanning: &[CMat], tol: f64) -> Vec<CMat> {
    let mut onb: Vec<CMat> = Vec::new();
    let reference = spanning.iter().map(frobenius).fold(0.0, f64::max);
    for m in spanning {
        let scale = frobenius(m);
        if scale == 0.0 || scale <= 1e-12 * reference {
            continue;
        }
        let mut v = m.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for e in &onb {
                let p = hs_inner(e, &v);
                v -= e * p;
            }
        }
        let n = frobenius(&v);
        if n > tol.max(1e-12) * scale {
            onb.push(v / real(n));
        }
    }
    onb
}

/// Coordinates of `m` against an orthonormal family.
pub fn onb_coords(onb: &[CMat], m: &CMat) -> Vec<C64> {
    onb.iter().map(|e| hs_inner(e, m)).collect()
}

/// Distance from `m` to the span of an orthonormal family.
pub fn span_residual(onb: &[CMat], m: &CMat) -> f64 {
    let mut v = m.clone();
    for e in onb {
        let p = hs_inner(e, &v);
        v -= e * p;
    }
    frobenius(&v)
}

pub fn combine(mats: &[CMat], coeffs: &[C64], rows: usize, cols: usize) -> CMat {
    let mut out = CMat::zeros(rows, cols);
    for (m, k) in mats.iter().zip(coeffs) {
        if *k != C64::new(0.0, 0.0) {
            out += m * *k;
        }
    }
    out
}

/// Moore–Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pinv(a: &CMat, tol: f64) -> CMat {
    if a.nrows() == 0 || a.ncols() == 0 {
        return CMat::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = tol * smax.max(1.0);
    let mut out = CMat::zeros(a.ncols(), a.nrows());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > cut {
            let uk = u.column(k);
            let vk = vt.row(k).adjoint();
            out += (vk * uk.adjoint()) * real(1.0 / s);
        }
    }
    out
}

/// Numerical rank with relative cutoff.
pub fn rank(a: &CMat, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * smax).count()
}

/// Matrix unit `e_{ij}` of the given shape.
pub fn matrix_unit(rows: usize, cols: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    m[(i, j)] = real(1.0);
    m
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn is_zero(m: &CMat, tol: f64) -> bool {
    m.iter().all(|x| x.norm() <= tol)
}

/// Unit of the *-algebra spanned by `basis` (assumed closed under product),
/// found by solving `e b_i = b_i` in the span. Returns `None` when the
/// span has no unit.
pub fn algebra_unit(basis: &[CMat], tol: f64) -> Option<CMat> {
    let onb = orthonormalize(basis, tol);
    if onb.is_empty() {
        return None;
    }
    let (r, c) = onb[0].shape();
    let k = onb.len();
    // Linear system: sum_m x_m (onb_m * onb_i) = onb_i and onb_i * onb_m.
    let entries = r * c;
    let mut a = CMat::zeros(2 * k * entries, k);
    let mut b = CVec::zeros(2 * k * entries);
    for i in 0..k {
        for m in 0..k {
            let left = &onb[m] * &onb[i];
            let right = &onb[i] * &onb[m];
            for (t, v) in left.iter().enumerate() {
                a[(i * entries + t, m)] = *v;
            }
            for (t, v) in right.iter().enumerate() {
                a[((k + i) * entries + t, m)] = *v;
            }
        }
        for (t, v) in onb[i].iter().enumerate() {
            b[i * entries + t] = *v;
            b[(k + i) * entries + t] = *v;
        }
    }
    let x = pinv(&a, 1e-12) * &b;
    let unit = combine(&onb, x.as_slice(), r, c);
    let ok = onb.iter().all(|e| {
        frobenius(&(&unit * e - e)) <= tol.sqrt() && frobenius(&(e * &unit - e)) <= tol.sqrt()
    });
    ok.then_some(unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_of_diagonal_corner() {
        // span{e11} inside M_2 has unit e11, not the identity
        let e11 = matrix_unit(2, 2, 0, 0);
        let u = algebra_unit(&[e11.clone()], 1e-9).unwrap();
        assert!(frobenius(&(u - e11)) < 1e-12);
    }

    #[test]
    fn span_without_unit() {
        // nilpotent span{e12}
        assert!(algebra_unit(&[matrix_unit(2, 2, 0, 1)], 1e-9).is_none());
    }

    #[test]
    fn orthonormalize_drops_dependent() {
        let a = matrix_unit(2, 2, 0, 0);
        let b = matrix_unit(2, 2, 1, 1);
        let s = &a + &b;
        assert_eq!(orthonormalize(&[a, b, s], 1e-9).len(), 2);
    }

    #[test]
    fn pinv_inverts_invertible() {
        let m = CMat::from_row_slice(2, 2, &[real(2.0), c(0.0, 1.0), real(0.0), real(1.0)]);
        let p = pinv(&m, 1e-12);
        assert!(frobenius(&(&m * p - identity(2))) < 1e-12);
    }

    #[test]
    fn op_norm_of_rank_one() {
        let v = CMat::from_row_slice(2, 1, &[real(3.0), real(4.0)]);
        let m = &v * v.adjoint();
        assert!(approx_eq(op_norm(&m), 25.0, 1e-12));
    }
}
