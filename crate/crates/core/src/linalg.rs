//! Real/complex bookkeeping for ℂⁿ ≅ ℝ²ⁿ.
//!
//! Real coordinates are ordered `(x_1, y_1, …, x_n, y_n)` with `z_k = x_k + i y_k`,
//! so the standard structure is block diagonal with blocks `[[0, -1], [1, 0]]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// A point or tangent vector of ℂⁿ.
pub type CVec = DVector<Complex64>;
/// A complex n×n matrix.
pub type CMat = DMatrix<Complex64>;
/// A real 2n×2n matrix.
pub type RMat = DMatrix<f64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn cvec(entries: &[Complex64]) -> CVec {
    DVector::from_column_slice(entries)
}

pub fn origin(n: usize) -> CVec {
    DVector::zeros(n)
}

pub fn to_real(v: &CVec) -> DVector<f64> {
    DVector::from_fn(2 * v.len(), |r, _| {
        let z = v[r / 2];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    })
}

pub fn from_real(v: &DVector<f64>) -> CVec {
    DVector::from_fn(v.len() / 2, |k, _| Complex64::new(v[2 * k], v[2 * k + 1]))
}

/// `diag(J_st^{(2)}, …)` on ℝ²ⁿ.
pub fn j_st(n: usize) -> RMat {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// Real matrix of `v ↦ B v`.
pub fn real_linear(b: &CMat) -> RMat {
    let (rows, cols) = b.shape();
    let mut m = DMatrix::zeros(2 * rows, 2 * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (p, q) = (b[(r, c)].re, b[(r, c)].im);
            m[(2 * r, 2 * c)] = p;
            m[(2 * r, 2 * c + 1)] = -q;
            m[(2 * r + 1, 2 * c)] = q;
            m[(2 * r + 1, 2 * c + 1)] = p;
        }
    }
    m
}

/// Real matrix of `v ↦ A v̄`.
pub fn real_antilinear(a: &CMat) -> RMat {
    let (rows, cols) = a.shape();
    let mut m = DMatrix::zeros(2 * rows, 2 * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (p, q) = (a[(r, c)].re, a[(r, c)].im);
            m[(2 * r, 2 * c)] = p;
            m[(2 * r, 2 * c + 1)] = q;
            m[(2 * r + 1, 2 * c)] = q;
            m[(2 * r + 1, 2 * c + 1)] = -p;
        }
    }
    m
}

/// Splits a real 2n×2n matrix into `v ↦ M v + N v̄`.
pub fn split_real(r: &RMat) -> (CMat, CMat) {
    let n = r.nrows() / 2;
    let js = j_st(n);
    let lin = (r - &js * r * &js) * 0.5;
    let anti = (r + &js * r * &js) * 0.5;
    let m = DMatrix::from_fn(n, n, |a, b| Complex64::new(lin[(2 * a, 2 * b)], lin[(2 * a + 1, 2 * b)]));
    let nn = DMatrix::from_fn(n, n, |a, b| Complex64::new(anti[(2 * a, 2 * b)], anti[(2 * a + 1, 2 * b)]));
    (m, nn)
}

pub fn conj_mat(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

pub fn conj_vec(v: &CVec) -> CVec {
    v.map(|z| z.conj())
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn spectral_norm_real(a: &RMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Euclidean norm of a complex vector (equals the real norm in ℝ²ⁿ).
pub fn cnorm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Numerical rank from singular values with a relative cut.
pub fn rank(m: &RMat, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_forms_agree_with_complex_action() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.1, 0.2),
                Complex64::new(-0.3, 0.05),
                Complex64::new(0.0, 0.4),
                Complex64::new(0.2, -0.1),
            ],
        );
        let v = cvec(&[Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)]);
        let lin = from_real(&(real_linear(&a) * to_real(&v)));
        let anti = from_real(&(real_antilinear(&a) * to_real(&v)));
        assert!(cnorm(&(lin - &a * &v)) < 1e-14);
        assert!(cnorm(&(anti - &a * conj_vec(&v))) < 1e-14);

        let (m, n) = split_real(&(real_linear(&a) + real_antilinear(&a.transpose())));
        assert!((m - &a).norm() < 1e-14);
        assert!((n - a.transpose()).norm() < 1e-14);
    }

    #[test]
    fn standard_structure_is_multiplication_by_i() {
        let v = cvec(&[Complex64::new(0.3, 0.7), Complex64::new(-1.0, 2.0)]);
        let jv = from_real(&(j_st(2) * to_real(&v)));
        assert!(cnorm(&(jv - v.map(|z| z * I))) < 1e-15);
    }
}
