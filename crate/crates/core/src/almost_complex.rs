//! Almost complex structures in a single chart of ℂⁿ.
//!
//! A structure `J` close to `J_st` is encoded by its complex matrix `A`,
//! defined through the conjugate-linear map `L = (J_st + J)^{-1}(J_st - J)`,
//! `L v = A v̄`. A map `z` is `J`-holomorphic iff `z_ζ̄ = A(z) z̄_ζ̄`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{conj_mat, cvec, j_st, rank, real_antilinear, real_linear, spectral_norm, split_real, CMat, CVec, RMat};

/// A row of complex coefficients, e.g. `F_z = (∂F/∂z_1, …, ∂F/∂z_n)`.
pub type CRow = RowDVector<Complex64>;

type MatrixFn = Arc<dyn Fn(&CVec) -> Result<CMat> + Send + Sync>;
type RealMatrixFn = Arc<dyn Fn(&CVec) -> Result<RMat> + Send + Sync>;

/// Tolerance for `J² = -I` on sampled structures.
const SQUARE_TOL: f64 = 1e-10;

/// The box `|Re(z_k - c_k)|, |Im(z_k - c_k)| <= half_width` a chart lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBox {
    pub center: CVec,
    pub half_width: f64,
}

impl ChartBox {
    pub fn new(center: CVec, half_width: f64) -> Self {
        ChartBox { center, half_width }
    }

    /// Box of the given half width about the origin of ℂⁿ.
    pub fn around_origin(n: usize, half_width: f64) -> Self {
        ChartBox { center: CVec::zeros(n), half_width }
    }

    pub fn unbounded(n: usize) -> Self {
        ChartBox { center: CVec::zeros(n), half_width: f64::INFINITY }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, z: &CVec) -> bool {
        z.len() == self.center.len()
            && z.iter().zip(self.center.iter()).all(|(a, c)| {
                let d = a - c;
                d.re.abs() <= self.half_width && d.im.abs() <= self.half_width
            })
    }

    fn check(&self, z: &CVec) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::InvalidParameter(format!("point of dimension {} in a chart of dimension {}", z.len(), self.dim())));
        }
        if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) || !self.contains(z) {
            return Err(Error::ChartEscape { node: None, point: z.iter().cloned().collect() });
        }
        Ok(())
    }
}

/// `z ↦ J(z)`, a real 2n×2n matrix field with `J² = -I`.
#[derive(Clone)]
pub struct StructureField {
    n: usize,
    domain: ChartBox,
    j: RealMatrixFn,
}

impl fmt::Debug for StructureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructureField").field("n", &self.n).field("domain", &self.domain).finish()
    }
}

impl StructureField {
    pub fn new(domain: ChartBox, j: impl Fn(&CVec) -> Result<RMat> + Send + Sync + 'static) -> Self {
        StructureField { n: domain.dim(), domain, j: Arc::new(j) }
    }

    pub fn standard(n: usize) -> Self {
        let js = j_st(n);
        StructureField::new(ChartBox::unbounded(n), move |_| Ok(js.clone()))
    }

    /// The structure whose complex matrix is the given field.
    pub fn from_a(a: &ComplexMatrixField) -> Self {
        let a = a.clone();
        StructureField { n: a.n, domain: a.domain.clone(), j: Arc::new(move |z| j_from_a(&a.eval(z)?)) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &ChartBox {
        &self.domain
    }

    /// `J(z)`, checked for `J² = -I`.
    pub fn eval(&self, z: &CVec) -> Result<RMat> {
        self.domain.check(z)?;
        let j = (self.j)(z)?;
        if j.shape() != (2 * self.n, 2 * self.n) {
            return Err(Error::InvalidParameter(format!("structure matrix has shape {:?}", j.shape())));
        }
        let defect = (&j * &j + RMat::identity(2 * self.n, 2 * self.n)).abs().max();
        if !(defect <= SQUARE_TOL) {
            return Err(Error::NotAComplexStructure(defect));
        }
        Ok(j)
    }
}

/// `z ↦ A(z)`, the complex matrix field of a structure.
#[derive(Clone)]
pub struct ComplexMatrixField {
    n: usize,
    domain: ChartBox,
    a: MatrixFn,
}

impl fmt::Debug for ComplexMatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexMatrixField").field("n", &self.n).field("domain", &self.domain).finish()
    }
}

impl ComplexMatrixField {
    pub fn new(domain: ChartBox, a: impl Fn(&CVec) -> Result<CMat> + Send + Sync + 'static) -> Self {
        ComplexMatrixField { n: domain.dim(), domain, a: Arc::new(a) }
    }

    pub fn zero(n: usize) -> Self {
        ComplexMatrixField::constant(CMat::zeros(n, n))
    }

    pub fn constant(a: CMat) -> Self {
        let n = a.nrows();
        ComplexMatrixField::new(ChartBox::unbounded(n), move |_| Ok(a.clone()))
    }

    /// `A(z) = A_0 + Σ_k z_k B_k`.
    pub fn linear(a0: CMat, slopes: Vec<CMat>) -> Result<Self> {
        let n = a0.nrows();
        if slopes.len() != n || slopes.iter().any(|b| b.shape() != (n, n)) || a0.ncols() != n {
            return Err(Error::InvalidParameter(format!("linear matrix field needs {n} blocks of size {n}x{n}")));
        }
        Ok(ComplexMatrixField::new(ChartBox::unbounded(n), move |z| {
            let mut a = a0.clone();
            for (zk, b) in z.iter().zip(&slopes) {
                a += b * *zk;
            }
            Ok(a)
        }))
    }

    pub fn with_domain(mut self, domain: ChartBox) -> Self {
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &ChartBox {
        &self.domain
    }

    pub fn eval(&self, z: &CVec) -> Result<CMat> {
        self.domain.check(z)?;
        let a = (self.a)(z)?;
        if a.shape() != (self.n, self.n) {
            return Err(Error::InvalidParameter(format!("complex matrix has shape {:?}", a.shape())));
        }
        if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter("complex matrix has non-finite entries".into()));
        }
        Ok(a)
    }

    /// Central difference along real coordinate `r` of `(x_1, y_1, …)`.
    pub fn partial(&self, z: &CVec, r: usize, step: f64) -> Result<CMat> {
        let mut e = CVec::zeros(self.n);
        e[r / 2] = if r.is_multiple_of(2) { Complex64::new(step, 0.0) } else { Complex64::new(0.0, step) };
        Ok((self.eval(&(z + &e))? - self.eval(&(z - &e))?) * Complex64::new(0.5 / step, 0.0))
    }

    /// `sup ‖A‖` over sample points.
    pub fn sup_norm(&self, samples: &[CVec]) -> Result<f64> {
        samples.iter().try_fold(0.0f64, |m, z| Ok(m.max(spectral_norm(&self.eval(z)?))))
    }
}

/// The complex matrix of a single structure matrix `J`.
pub fn a_from_j_matrix(j: &RMat) -> Result<CMat> {
    let n = j.nrows() / 2;
    let js = j_st(n);
    let defect = (j * j + RMat::identity(2 * n, 2 * n)).abs().max();
    if !(defect <= SQUARE_TOL) {
        return Err(Error::NotAComplexStructure(defect));
    }
    let sum = &js + j;
    let scale = js.norm() + j.norm();
    let svd = sum.clone().svd(false, false);
    if svd.singular_values.min() <= 1e-12 * scale {
        return Err(Error::OppositeStructure);
    }
    let l = sum.lu().solve(&(&js - j)).ok_or(Error::OppositeStructure)?;
    let (lin, anti) = split_real(&l);
    let linear_part = spectral_norm(&lin);
    if linear_part > 1e-8 * (1.0 + spectral_norm(&anti)) {
        return Err(Error::Precondition(format!("L is not conjugate-linear: linear part {linear_part:e}")));
    }
    Ok(anti)
}

/// `A(z)` for a structure field.
pub fn a_from_j(j: &StructureField, z: &CVec) -> Result<CMat> {
    a_from_j_matrix(&j.eval(z)?)
}

/// The structure with complex matrix `A`: `J = J_st (I - L)(I + L)^{-1}`, `L v = A v̄`.
pub fn j_from_a(a: &CMat) -> Result<RMat> {
    let norm = spectral_norm(a);
    if !(norm < 1.0) {
        return Err(Error::NormTooLarge(norm));
    }
    let n = a.nrows();
    let l = real_antilinear(a);
    let id = RMat::identity(2 * n, 2 * n);
    let inv = (&id + &l).try_inverse().ok_or(Error::NormTooLarge(norm))?;
    Ok(j_st(n) * (&id - &l) * inv)
}

/// A smooth change of coordinates `w = t(z)` with Wirtinger Jacobians.
pub trait CoordinateChange: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, z: &CVec) -> CVec;
    fn inverse(&self, w: &CVec) -> Result<CVec>;
    /// `(t_z, t_z̄)` at `z`.
    fn jacobian(&self, z: &CVec) -> (CMat, CMat);
}

/// `t(z) = M z + N z̄ + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineChange {
    pub m: CMat,
    pub n: CMat,
    pub c: CVec,
    real_inverse: RMat,
}

impl AffineChange {
    pub fn new(m: CMat, n: CMat, c: CVec) -> Result<Self> {
        let real = real_linear(&m) + real_antilinear(&n);
        let real_inverse = real.clone().try_inverse().ok_or_else(|| Error::SingularChange(c.iter().cloned().collect()))?;
        if rank(&real, 1e-12) < real.nrows() {
            return Err(Error::SingularChange(c.iter().cloned().collect()));
        }
        Ok(AffineChange { m, n, c, real_inverse })
    }

    pub fn identity(n: usize) -> Self {
        AffineChange::new(CMat::identity(n, n), CMat::zeros(n, n), CVec::zeros(n)).expect("identity is invertible")
    }

    /// From a real matrix acting on `(x_1, y_1, …)` and a translation.
    pub fn from_real(r: &RMat, c: CVec) -> Result<Self> {
        let (m, n) = split_real(r);
        AffineChange::new(m, n, c)
    }

    /// The real 2n×2n matrix of the linear part.
    pub fn real_matrix(&self) -> RMat {
        real_linear(&self.m) + real_antilinear(&self.n)
    }
}

impl CoordinateChange for AffineChange {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn apply(&self, z: &CVec) -> CVec {
        &self.m * z + &self.n * z.map(|v| v.conj()) + &self.c
    }

    fn inverse(&self, w: &CVec) -> Result<CVec> {
        let d = crate::linalg::to_real(&(w - &self.c));
        Ok(crate::linalg::from_real(&(&self.real_inverse * d)))
    }

    fn jacobian(&self, _z: &CVec) -> (CMat, CMat) {
        (self.m.clone(), self.n.clone())
    }
}

/// The transformation rule `A' = (t_z A + t_z̄)(conj(t_z) + conj(t_z̄) A)^{-1}`.
pub fn pushforward_a_matrix(a: &CMat, tz: &CMat, tzb: &CMat) -> Result<CMat> {
    let num = tz * a + tzb;
    let den = conj_mat(tz) + conj_mat(tzb) * a;
    let scale = den.norm().max(1.0);
    if den.clone().svd(false, false).singular_values.min() <= 1e-12 * scale {
        return Err(Error::SingularChange(Vec::new()));
    }
    let inv = den.try_inverse().ok_or(Error::SingularChange(Vec::new()))?;
    Ok(num * inv)
}

/// `A'` on the image chart: `A'(w) = rule(A(t^{-1}(w)))`.
pub fn pushforward_a(field: &ComplexMatrixField, t: Arc<dyn CoordinateChange>, image: ChartBox) -> Result<ComplexMatrixField> {
    if t.dim() != field.dim() || image.dim() != field.dim() {
        return Err(Error::InvalidParameter("coordinate change and field dimensions differ".into()));
    }
    let field = field.clone();
    Ok(ComplexMatrixField::new(image, move |w| {
        let z = t.inverse(w)?;
        let a = field.eval(&z)?;
        let (tz, tzb) = t.jacobian(&z);
        pushforward_a_matrix(&a, &tz, &tzb).map_err(|_| Error::SingularChange(z.iter().cloned().collect()))
    }))
}

/// The forms `α = dz - A dz̄`, `ᾱ = dz̄ - Ā dz` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FormBasis {
    a: CMat,
    /// Rows `α_1..α_n, ᾱ_1..ᾱ_n` against `(dz, dz̄)`: `[[I, -A], [-Ā, I]]`.
    coefficients: CMat,
}

impl FormBasis {
    pub fn new(a: &CMat) -> Result<Self> {
        let norm = spectral_norm(a);
        if !(norm < 1.0) {
            return Err(Error::NormTooLarge(norm));
        }
        let n = a.nrows();
        let mut c = CMat::zeros(2 * n, 2 * n);
        c.view_mut((0, 0), (n, n)).copy_from(&CMat::identity(n, n));
        c.view_mut((n, n), (n, n)).copy_from(&CMat::identity(n, n));
        c.view_mut((0, n), (n, n)).copy_from(&(-a));
        c.view_mut((n, 0), (n, n)).copy_from(&(-conj_mat(a)));
        Ok(FormBasis { a: a.clone(), coefficients: c })
    }

    pub fn coefficients(&self) -> &CMat {
        &self.coefficients
    }

    pub fn determinant(&self) -> Complex64 {
        self.coefficients.determinant()
    }

    /// Coefficients against `(dz, dz̄)` of `c_α·α + c_ᾱ·ᾱ`.
    pub fn recompose(&self, c_alpha: &CRow, c_alpha_bar: &CRow) -> (CRow, CRow) {
        let abar = conj_mat(&self.a);
        (c_alpha - c_alpha_bar * abar, c_alpha_bar - c_alpha * &self.a)
    }
}

pub fn form_basis(a: &CMat) -> Result<FormBasis> {
    FormBasis::new(a)
}

/// `∂̄_J F` at a point for a function with Wirtinger gradients `F_z`, `F_z̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct DbarJ {
    /// Coefficients against `ᾱ`: `F_z̄ (I - ĀA)^{-1} + F_z (I - AĀ)^{-1} A`.
    pub full: CRow,
    /// The Cauchy-Riemann row `F_z̄ + F_z A`.
    pub reduced: CRow,
}

impl DbarJ {
    pub fn norm(&self) -> f64 {
        self.full.norm()
    }
}

pub fn dbar_j(fz: &CRow, fzb: &CRow, a: &CMat) -> Result<DbarJ> {
    let (p, q) = resolvents(a)?;
    Ok(DbarJ { full: fzb * &q + fz * &p * a, reduced: fzb + fz * a })
}

/// `∂_J F`: coefficients against `α`, `F_z (I - AĀ)^{-1} + F_z̄ (I - ĀA)^{-1} Ā`.
pub fn d_j(fz: &CRow, fzb: &CRow, a: &CMat) -> Result<CRow> {
    let (p, q) = resolvents(a)?;
    Ok(fz * &p + fzb * &q * conj_mat(a))
}

/// `((I - AĀ)^{-1}, (I - ĀA)^{-1})`.
fn resolvents(a: &CMat) -> Result<(CMat, CMat)> {
    let norm = spectral_norm(a);
    if !(norm < 1.0) {
        return Err(Error::NormTooLarge(norm));
    }
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let abar = conj_mat(a);
    let p = (&id - a * &abar).try_inverse().ok_or(Error::NormTooLarge(norm))?;
    let q = (&id - &abar * a).try_inverse().ok_or(Error::NormTooLarge(norm))?;
    Ok((p, q))
}

/// Smallest dilation tried by [`normalize_chart`].
pub const LAMBDA_MIN: f64 = 1e-4;
const FD_STEP: f64 = 1e-4;

/// Result of [`normalize_chart`]: `w = λ^{-1} P (z - p)` with `J(p)` carried to `J_st`.
#[derive(Clone)]
pub struct NormalizedChart {
    pub change: AffineChange,
    pub lambda: f64,
    pub field: ComplexMatrixField,
    pub seminorm: f64,
}

impl fmt::Debug for NormalizedChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalizedChart")
            .field("change", &self.change)
            .field("lambda", &self.lambda)
            .field("seminorm", &self.seminorm)
            .finish()
    }
}

/// Affine chart about `p` in which `J(p) = J_st`, dilated until the sampled
/// `C^m` seminorm of the pushed-forward `A` on the unit ball is at most `lambda0`.
pub fn normalize_chart(j: &StructureField, p: &CVec, lambda0: f64, m: usize) -> Result<NormalizedChart> {
    if !(lambda0 > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda0 must be positive, got {lambda0}")));
    }
    if m > 2 {
        return Err(Error::InvalidParameter(format!("derivative order {m} > 2 is not supported")));
    }
    let n = j.dim();
    let jp = j.eval(p)?;
    let b = adapted_frame(&jp)?;
    let b_inv = b.clone().try_inverse().ok_or_else(|| Error::RankDeficient("adapted frame".into()))?;
    let field = ComplexMatrixField::new(j.domain().clone(), {
        let j = j.clone();
        move |z| a_from_j(&j, z)
    });
    let samples = unit_ball_lattice(n);

    let mut lambda = 1.0;
    let mut last = f64::INFINITY;
    while lambda >= LAMBDA_MIN {
        let change = AffineChange::from_real(&(&b_inv / lambda), CVec::zeros(n))?;
        let shift = change.apply(p);
        let change = AffineChange::new(change.m.clone(), change.n.clone(), -shift)?;
        let image = ChartBox::around_origin(n, f64::INFINITY);
        let pushed = pushforward_a(&field, Arc::new(change.clone()), image)?;
        let seminorm = sampled_seminorm(&pushed, &samples, m).unwrap_or(f64::INFINITY);
        if seminorm <= lambda0 {
            return Ok(NormalizedChart { change, lambda, field: pushed, seminorm });
        }
        last = seminorm;
        lambda *= 0.5;
    }
    Err(Error::NormalizationFailed { lambda: lambda * 2.0, seminorm: last })
}

/// Columns `v_1, J v_1, …, v_n, J v_n` with `v_k` taken greedily from the
/// real coordinate directions, so that `B J_st = J B`.
fn adapted_frame(j: &RMat) -> Result<RMat> {
    let dim = j.nrows();
    let mut b = RMat::zeros(dim, 0);
    for r in 0..dim {
        if b.ncols() == dim {
            break;
        }
        let mut e = nalgebra::DVector::zeros(dim);
        e[r] = 1.0;
        let je = j * &e;
        let candidate = b.clone().insert_columns(b.ncols(), 2, 0.0);
        let mut candidate = candidate;
        let k = b.ncols();
        candidate.set_column(k, &e);
        candidate.set_column(k + 1, &je);
        if rank(&candidate, 1e-9) == k + 2 {
            b = candidate;
        }
    }
    if b.ncols() != dim {
        return Err(Error::RankDeficient("no J-adapted frame".into()));
    }
    Ok(b)
}

/// `{-1, -1/2, 0, 1/2, 1}^{2n}` restricted to the closed unit ball.
fn unit_ball_lattice(n: usize) -> Vec<CVec> {
    let levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let total = levels.len().pow(2 * n as u32);
    (0..total)
        .filter_map(|mut code| {
            let coords: Vec<f64> = (0..2 * n)
                .map(|_| {
                    let v = levels[code % levels.len()];
                    code /= levels.len();
                    v
                })
                .collect();
            let r2: f64 = coords.iter().map(|x| x * x).sum();
            (r2 <= 1.0 + 1e-12).then(|| cvec(&coords.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect::<Vec<_>>()))
        })
        .collect()
}

/// Max over samples of the spectral norms of all finite-difference derivatives of order `<= m`.
fn sampled_seminorm(field: &ComplexMatrixField, samples: &[CVec], m: usize) -> Result<f64> {
    let dim = 2 * field.dim();
    let mut worst = 0.0f64;
    for z in samples {
        worst = worst.max(spectral_norm(&field.eval(z)?));
        if m >= 1 {
            for r in 0..dim {
                worst = worst.max(spectral_norm(&field.partial(z, r, FD_STEP)?));
            }
        }
        if m >= 2 {
            for r in 0..dim {
                for s in r..dim {
                    let e = unit(field.dim(), s, FD_STEP);
                    let d = (field.partial(&(z + &e), r, FD_STEP)? - field.partial(&(z - &e), r, FD_STEP)?) * Complex64::new(0.5 / FD_STEP, 0.0);
                    worst = worst.max(spectral_norm(&d));
                }
            }
        }
    }
    Ok(worst)
}

fn unit(n: usize, r: usize, step: f64) -> CVec {
    let mut e = CVec::zeros(n);
    e[r / 2] = if r.is_multiple_of(2) { Complex64::new(step, 0.0) } else { Complex64::new(0.0, step) };
    e
}

impl NormalizedChart {
    /// Image of a point of the original chart.
    pub fn to_normal(&self, z: &CVec) -> CVec {
        self.change.apply(z)
    }

    pub fn from_normal(&self, w: &CVec) -> Result<CVec> {
        self.change.inverse(w)
    }
}

/// Random-free helper used by tests and experiments: `diag(d_1, …, d_n)`.
pub fn diag(entries: &[Complex64]) -> CMat {
    DMatrix::from_diagonal(&cvec(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, to_real};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_a() -> CMat {
        DMatrix::from_row_slice(2, 2, &[c(0.1, 0.2), c(-0.15, 0.05), c(0.0, 0.12), c(0.2, -0.1)])
    }

    #[test]
    fn standard_structure_has_zero_matrix() {
        assert_eq!(a_from_j_matrix(&j_st(3)).unwrap(), CMat::zeros(3, 3));
        assert!((j_from_a(&CMat::zeros(2, 2)).unwrap() - j_st(2)).abs().max() < 1e-15);
    }

    #[test]
    fn roundtrip_on_a_diagonal_matrix() {
        let a = diag(&[c(0.3, 0.0)]);
        let back = a_from_j_matrix(&j_from_a(&a).unwrap()).unwrap();
        assert!((back - a).norm() < 1e-12);
    }

    #[test]
    fn j_squares_to_minus_identity() {
        let j = j_from_a(&diag(&[c(0.5, 0.0)])).unwrap();
        assert!((&j * &j + RMat::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn holomorphy_condition_matches_the_structure() {
        // z is J-holomorphic iff dz∘j = J∘dz; with dz = (P, Q) for ∂_ζ, ∂_ζ̄ this is z_ζ̄ = A z̄_ζ̄
        let a = sample_a();
        let j = j_from_a(&a).unwrap();
        let z_d = cvec(&[c(1.0, 0.3), c(-0.5, 0.2)]);
        let z_dbar = &a * z_d.map(|v| v.conj());
        // real derivatives: z_x = z_ζ + z_ζ̄, z_y = i(z_ζ - z_ζ̄)
        let zx = &z_d + &z_dbar;
        let zy = (&z_d - &z_dbar).map(|v| v * c(0.0, 1.0));
        let jzx = from_real(&(&j * to_real(&zx)));
        assert!((jzx - zy).norm() < 1e-12);
    }

    #[test]
    fn unit_norm_rejected() {
        assert!(j_from_a(&diag(&[c(0.999, 0.0)])).is_ok());
        assert_eq!(j_from_a(&diag(&[c(1.0, 0.0)])).unwrap_err(), Error::NormTooLarge(1.0));
        assert!(FormBasis::new(&diag(&[c(0.0, 1.5)])).is_err());
    }

    #[test]
    fn opposite_structure_reported() {
        assert_eq!(a_from_j_matrix(&(-j_st(2))).unwrap_err(), Error::OppositeStructure);
        let bad = RMat::identity(2, 2);
        assert!(matches!(a_from_j_matrix(&bad), Err(Error::NotAComplexStructure(_))));
    }

    #[test]
    fn identity_and_holomorphic_changes() {
        let a = sample_a();
        let id = CMat::identity(2, 2);
        assert!((pushforward_a_matrix(&a, &id, &CMat::zeros(2, 2)).unwrap() - &a).norm() < 1e-14);
        let tz = DMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, 1.0), c(0.5, 0.0), c(-1.0, 0.0)]);
        assert_eq!(pushforward_a_matrix(&CMat::zeros(2, 2), &tz, &CMat::zeros(2, 2)).unwrap(), CMat::zeros(2, 2));
    }

    #[test]
    fn pushforward_agrees_with_real_conjugation() {
        let a = sample_a();
        let tz = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.2), c(0.1, 0.0), c(-0.3, 0.4), c(0.9, -0.1)]);
        let tzb = DMatrix::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.0, -0.1), c(0.05, 0.1), c(0.1, 0.1)]);
        let t = real_linear(&tz) + real_antilinear(&tzb);
        let pushed_j = &t * j_from_a(&a).unwrap() * t.clone().try_inverse().unwrap();
        let oracle = a_from_j_matrix(&pushed_j).unwrap();
        assert!((pushforward_a_matrix(&a, &tz, &tzb).unwrap() - oracle).norm() < 1e-10);
    }

    #[test]
    fn singular_denominator_reported() {
        // conj(t_z) + conj(t_z̄) A = 0 for A = 0.5, t_z = 1, t_z̄ = -2
        let a = diag(&[c(0.5, 0.0)]);
        let err = pushforward_a_matrix(&a, &diag(&[c(1.0, 0.0)]), &diag(&[c(-2.0, 0.0)])).unwrap_err();
        assert!(matches!(err, Error::SingularChange(_)));
    }

    #[test]
    fn dbar_of_conjugate_coordinate() {
        let n = 3;
        let fz = CRow::zeros(n);
        let mut fzb = CRow::zeros(n);
        fzb[0] = c(1.0, 0.0);
        let d = dbar_j(&fz, &fzb, &CMat::zeros(n, n)).unwrap();
        assert_eq!(d.full, fzb);
        let hol = dbar_j(&CRow::from_row_slice(&[c(1.0, 0.0), c(2.0, 1.0), c(0.0, 0.0)]), &CRow::zeros(n), &CMat::zeros(n, n)).unwrap();
        assert_eq!(hol.norm(), 0.0);
    }

    #[test]
    fn form_basis_determinant() {
        let b = FormBasis::new(&diag(&[c(0.5, 0.0)])).unwrap();
        assert!((b.determinant() - c(0.75, 0.0)).norm() < 1e-15);
        let zero = FormBasis::new(&CMat::zeros(2, 2)).unwrap();
        assert_eq!(zero.coefficients(), &CMat::identity(4, 4));
    }

    #[test]
    fn recomposition_restores_the_differential() {
        let a = sample_a();
        let fz = CRow::from_row_slice(&[c(0.3, -1.0), c(2.0, 0.5)]);
        let fzb = CRow::from_row_slice(&[c(-0.4, 0.1), c(0.0, 0.7)]);
        let basis = FormBasis::new(&a).unwrap();
        let (dz, dzb) = basis.recompose(&d_j(&fz, &fzb, &a).unwrap(), &dbar_j(&fz, &fzb, &a).unwrap().full);
        assert!((dz - fz).norm() < 1e-12);
        assert!((dzb - fzb).norm() < 1e-12);
    }

    #[test]
    fn field_domain_is_enforced() {
        let f = ComplexMatrixField::zero(1).with_domain(ChartBox::around_origin(1, 1.0));
        assert!(f.eval(&cvec(&[c(0.5, 0.5)])).is_ok());
        assert!(matches!(f.eval(&cvec(&[c(1.5, 0.0)])), Err(Error::ChartEscape { .. })));
    }

    #[test]
    fn standard_structure_normalizes_at_unit_scale() {
        let chart = normalize_chart(&StructureField::standard(2), &cvec(&[c(0.3, 0.0), c(0.0, -1.0)]), 1e-3, 2).unwrap();
        assert_eq!(chart.lambda, 1.0);
        assert_eq!(chart.seminorm, 0.0);
        assert!((chart.change.m.clone() - CMat::identity(2, 2)).norm() < 1e-14);
        assert!(chart.change.n.norm() < 1e-14);
        assert!(chart.to_normal(&cvec(&[c(0.3, 0.0), c(0.0, -1.0)])).norm() < 1e-14);
    }

    #[test]
    fn linear_vanishing_structure_scales_with_lambda() {
        let mut e11 = CMat::zeros(2, 2);
        e11[(0, 0)] = c(0.3, 0.0);
        let a = ComplexMatrixField::linear(CMat::zeros(2, 2), vec![e11, CMat::zeros(2, 2)]).unwrap();
        let j = StructureField::from_a(&a.with_domain(ChartBox::around_origin(2, 2.0)));
        let chart = normalize_chart(&j, &CVec::zeros(2), 0.05, 1).unwrap();
        // sup over the ball of |0.3 λ w_1| and its derivative 0.3 λ
        assert_eq!(chart.lambda, 0.125);
        assert!((chart.seminorm - 0.3 * 0.125).abs() < 1e-6);
        let a0 = chart.field.eval(&CVec::zeros(2)).unwrap();
        assert!(a0.norm() < 1e-12);
    }

    #[test]
    fn unreachable_target_fails() {
        let a = ComplexMatrixField::new(ChartBox::around_origin(1, 1.0), |z| Ok(diag(&[z[0] * 0.5 + 0.1])));
        let j = StructureField::from_a(&a);
        let err = normalize_chart(&j, &CVec::zeros(1), 1e-6, 0).unwrap_err();
        assert!(matches!(err, Error::NormalizationFailed { .. }));
    }
}
