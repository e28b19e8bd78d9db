//! `J`-holomorphic discs: solutions of `z_ζ̄ = A(z) z̄_ζ̄` on the grid disc,
//! obtained as fixed points `z = w + T[A(z) z̄_ζ̄]` for a holomorphic seed `w`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::almost_complex::ComplexMatrixField;
use crate::cauchy_green::shared_operator;
use crate::error::{Error, Result};
use crate::geometry::DefiningDomain;
use crate::grid::{make_grid, wirtinger_d, wirtinger_dbar, Grid, GridFunction};
use crate::linalg::{cnorm, spectral_norm, CVec};

/// Fraction of the radius on which residuals are measured.
pub const INTERIOR: f64 = 0.9;
/// Largest `‖A‖` tolerated on the image of an iterate.
pub const NORM_LIMIT: f64 = 0.5;

/// A map from the grid disc to ℂⁿ with its `J`-holomorphy residual.
#[derive(Debug, Clone)]
pub struct DiscMap {
    grid: Grid,
    components: Vec<GridFunction>,
    residual: f64,
    /// Picard steps taken to produce the map (0 for seeds).
    pub iterations: usize,
    /// `‖z_{k+1} - z_k‖_∞` per Picard step.
    pub increments: Vec<f64>,
}

impl DiscMap {
    /// A map with its residual measured against the field `a`.
    pub fn new(components: Vec<GridFunction>, a: &ComplexMatrixField) -> Result<Self> {
        let grid = check_components(&components)?;
        if components.len() != a.dim() {
            return Err(Error::InvalidParameter(format!("disc has {} components, field has dimension {}", components.len(), a.dim())));
        }
        let residual = jholo_residual(&components, a)?;
        Ok(DiscMap { grid, components, residual, iterations: 0, increments: Vec::new() })
    }

    /// A map with its residual measured against the standard structure.
    pub fn seed(components: Vec<GridFunction>) -> Result<Self> {
        let n = components.len();
        DiscMap::new(components, &ComplexMatrixField::zero(n))
    }

    /// `w(ζ) = p + scale·ζ·v`.
    pub fn affine(grid: &Grid, p: &CVec, v: &CVec, scale: f64) -> Result<Self> {
        if p.len() != v.len() || p.is_empty() {
            return Err(Error::InvalidParameter("point and direction dimensions differ".into()));
        }
        let components = (0..p.len()).map(|k| GridFunction::from_fn(grid, |z| p[k] + z * v[k] * scale)).collect();
        DiscMap::seed(components)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &GridFunction {
        &self.components[k]
    }

    /// Cached `sup |z_ζ̄ - A(z) z̄_ζ̄|` over nodes with `|ζ| <= 0.9·radius`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn recompute_residual(&self, a: &ComplexMatrixField) -> Result<f64> {
        jholo_residual(&self.components, a)
    }

    /// `z(ζ_k)` at node `k`.
    pub fn point(&self, k: usize) -> CVec {
        DVector::from_iterator(self.dim(), self.components.iter().map(|c| c.value(k)))
    }

    pub fn center(&self) -> CVec {
        self.point(self.grid.center_index())
    }

    /// `z(ζ)` between nodes by bicubic interpolation.
    pub fn evaluate(&self, zeta: Complex64) -> Option<CVec> {
        let values: Option<Vec<Complex64>> = self.components.iter().map(|c| c.interpolate(zeta)).collect();
        values.map(DVector::from_vec)
    }

    /// `z_ζ(0)`, the achieved tangent at the center.
    pub fn tangent_at_center(&self) -> CVec {
        let c = self.grid.center_index();
        DVector::from_iterator(self.dim(), self.components.iter().map(|f| wirtinger_d(f).value(c)))
    }

    pub fn sup_distance(&self, other: &DiscMap) -> Result<f64> {
        if other.dim() != self.dim() || !self.components[0].same_grid(&other.components[0]) {
            return Err(Error::GridMismatch);
        }
        Ok((0..self.grid.len()).map(|k| cnorm(&(self.point(k) - other.point(k)))).fold(0.0, f64::max))
    }

    fn sup_increment(&self, next: &[GridFunction]) -> f64 {
        (0..self.grid.len())
            .map(|k| self.components.iter().zip(next).map(|(a, b)| (a.value(k) - b.value(k)).norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

fn check_components(components: &[GridFunction]) -> Result<Grid> {
    let first = components.first().ok_or_else(|| Error::InvalidParameter("a disc needs at least one component".into()))?;
    if components.iter().any(|c| !c.same_grid(first)) {
        return Err(Error::GridMismatch);
    }
    Ok(first.grid().clone())
}

/// `A(z(ζ_k))` at every node, with chart escapes attributed to the first offending node.
fn field_on_image(components: &[GridFunction], a: &ComplexMatrixField) -> Result<Vec<DMatrix<Complex64>>> {
    let grid = components[0].grid();
    (0..grid.len())
        .map(|k| {
            let z = DVector::from_iterator(components.len(), components.iter().map(|c| c.value(k)));
            a.eval(&z).map_err(|e| match e {
                Error::ChartEscape { point, .. } => Error::ChartEscape { node: Some(k), point },
                other => other,
            })
        })
        .collect()
}

/// `sup |z_ζ̄ - A(z) z̄_ζ̄|` over nodes with `|ζ| <= 0.9·radius`.
pub fn jholo_residual(components: &[GridFunction], a: &ComplexMatrixField) -> Result<f64> {
    let grid = check_components(components)?;
    let fields = field_on_image(components, a)?;
    let dbar: Vec<GridFunction> = components.iter().map(wirtinger_dbar).collect();
    let d: Vec<GridFunction> = components.iter().map(wirtinger_d).collect();
    let n = components.len();
    let mut worst = 0.0f64;
    for k in grid.within(INTERIOR) {
        let zb = DVector::from_iterator(n, d.iter().map(|f| f.value(k).conj()));
        let lhs = DVector::from_iterator(n, dbar.iter().map(|f| f.value(k)));
        worst = worst.max(cnorm(&(lhs - &fields[k] * zb)));
    }
    Ok(worst)
}

/// `T[A(z) z̄_ζ̄]` componentwise.
fn correction(components: &[GridFunction], a: &ComplexMatrixField) -> Result<(Vec<GridFunction>, f64)> {
    let grid = components[0].grid().clone();
    let fields = field_on_image(components, a)?;
    let top = fields.iter().map(spectral_norm).fold(0.0, f64::max);
    let n = components.len();
    let d: Vec<GridFunction> = components.iter().map(wirtinger_d).collect();
    let mut rhs = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; n];
    for (k, field) in fields.iter().enumerate() {
        let zb = DVector::from_iterator(n, d.iter().map(|f| f.value(k).conj()));
        let g = field * zb;
        for c in 0..n {
            rhs[c][k] = g[c];
        }
    }
    let op = shared_operator(&grid);
    let out = rhs
        .into_iter()
        .map(|values| op.transform(&GridFunction::new(grid.clone(), values)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, top))
}

/// `Ψ_J(z) = z - T[A(z) z̄_ζ̄]`.
pub fn psi_j(z: &DiscMap, a: &ComplexMatrixField) -> Result<DiscMap> {
    let (corr, _) = correction(z.components(), a)?;
    let w = z.components.iter().zip(&corr).map(|(c, t)| c - t).collect();
    DiscMap::seed(w)
}

/// Picard iteration `z_{k+1} = w + T[A(z_k) z̄_{k,ζ̄}]` until the residual is at most `tol`.
pub fn solve_disc(w: &DiscMap, a: &ComplexMatrixField, tol: f64, max_iter: usize) -> Result<DiscMap> {
    solve(w, a, tol, max_iter, false)
}

/// As [`solve_disc`], with the correction shifted so that `z(0) = w(0)`.
pub fn solve_disc_anchored(w: &DiscMap, a: &ComplexMatrixField, tol: f64, max_iter: usize) -> Result<DiscMap> {
    solve(w, a, tol, max_iter, true)
}

fn solve(w: &DiscMap, a: &ComplexMatrixField, tol: f64, max_iter: usize, anchored: bool) -> Result<DiscMap> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter(format!("need tol > 0 and max_iter >= 1, got {tol}, {max_iter}")));
    }
    if w.dim() != a.dim() {
        return Err(Error::InvalidParameter(format!("seed has dimension {}, field {}", w.dim(), a.dim())));
    }
    let seed_residual = jholo_residual(w.components(), &ComplexMatrixField::zero(w.dim()))?;
    if seed_residual > tol / 10.0 {
        return Err(Error::Precondition(format!("seed is not discretely holomorphic: residual {seed_residual:e}")));
    }
    let center = w.grid.center_index();
    let mut current = DiscMap { residual: f64::INFINITY, ..w.clone() };
    let mut increments = Vec::new();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let (mut corr, top) = correction(current.components(), a)?;
        if top > NORM_LIMIT {
            return Err(Error::Precondition(format!("sup ‖A‖ = {top} on the disc image exceeds {NORM_LIMIT}")));
        }
        if anchored {
            for c in &mut corr {
                let shift = c.value(center);
                *c = c.map(|v| v - shift);
            }
        }
        let next: Vec<GridFunction> = w.components.iter().zip(&corr).map(|(s, t)| s + t).collect();
        increments.push(current.sup_increment(&next));
        current.components = next;
        residual = jholo_residual(current.components(), a)?;
        if residual <= tol {
            current.residual = residual;
            current.iterations = it;
            current.increments = increments;
            return Ok(current);
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual })
}

/// Settings for [`nijenhuis_woolf_disc_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscOptions {
    pub resolution: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DiscOptions {
    fn default() -> Self {
        DiscOptions { resolution: 64, tol: 1e-6, max_iter: 50 }
    }
}

/// A `J`-disc through `p` tangent to `v` at the center: the seed `p + scale·ζ·v`
/// solved with the center pinned, so `z(0) = p` exactly.
pub fn nijenhuis_woolf_disc(p: &CVec, v: &CVec, a: &ComplexMatrixField, scale: f64) -> Result<DiscMap> {
    nijenhuis_woolf_disc_with(p, v, a, scale, &DiscOptions::default())
}

pub fn nijenhuis_woolf_disc_with(p: &CVec, v: &CVec, a: &ComplexMatrixField, scale: f64, opts: &DiscOptions) -> Result<DiscMap> {
    let grid = make_grid(1.0, opts.resolution)?;
    let w = DiscMap::affine(&grid, p, v, scale)?;
    solve_disc_anchored(&w, a, opts.tol, opts.max_iter)
}

/// A curve `[0, 1] → ℂⁿ`.
pub type Curve = Arc<dyn Fn(f64) -> CVec + Send + Sync>;

/// Step for one-sided curve derivatives at the endpoint.
const CURVE_STEP: f64 = 1e-4;
/// Angle (radians) above which two curve tangents count as distinct.
pub const TANGENCY_ANGLE: f64 = 1e-3;

/// `γ'(1)` from the one-sided second-order difference.
pub fn end_tangent(curve: &Curve) -> CVec {
    let h = CURVE_STEP;
    (curve(1.0).map(|c| c * 3.0) - curve(1.0 - h).map(|c| c * 4.0) + curve(1.0 - 2.0 * h)).map(|c| c / (2.0 * h))
}

/// Angle between two real vectors of ℝ²ⁿ.
pub fn real_angle(u: &CVec, v: &CVec) -> f64 {
    let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    (dot / (cnorm(u) * cnorm(v))).clamp(-1.0, 1.0).acos()
}

/// One member `z_t` of a transverse family.
#[derive(Debug, Clone)]
pub struct TransverseSample {
    pub t: f64,
    pub disc: DiscMap,
    /// `ζ_2(t)` with `z_t(ζ_2(t)) ≈ γ_2(t)`; `ζ_1(t) = 0`.
    pub zeta2: Complex64,
    pub distance: f64,
    /// Radius with `z_t(ρ𝔻) ⊂ Ω`.
    pub rho: f64,
    /// `|ζ_2(t)| / (1 - t)`.
    pub ratio: f64,
}

pub struct TransverseFamily {
    /// Disc direction: unit, in the complex line of the common tangent.
    pub direction: CVec,
    /// Angle between `γ_1'(1)` and `γ_2'(1)`.
    pub tangent_angle: f64,
    pub samples: Vec<(f64, Result<TransverseSample>)>,
}

impl fmt::Debug for TransverseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransverseFamily")
            .field("direction", &self.direction)
            .field("tangent_angle", &self.tangent_angle)
            .field("samples", &self.samples.len())
            .finish()
    }
}

impl TransverseFamily {
    pub fn is_tangent(&self) -> bool {
        self.tangent_angle <= TANGENCY_ANGLE
    }

    pub fn successes(&self) -> impl Iterator<Item = &TransverseSample> {
        self.samples.iter().filter_map(|(_, s)| s.as_ref().ok())
    }
}

/// Discs centered at `γ_1(t)` along the complex line of `γ_1'(1)`, each
/// solved `J`-holomorphic, with the parameter `ζ_2(t)` of `γ_2(t)` located on them.
pub fn transverse_family(
    g1: &Curve,
    g2: &Curve,
    a: &ComplexMatrixField,
    domain: &DefiningDomain,
    t_samples: &[f64],
    opts: &DiscOptions,
) -> Result<TransverseFamily> {
    let t1 = end_tangent(g1);
    let t2 = end_tangent(g2);
    if cnorm(&t1) == 0.0 || cnorm(&t2) == 0.0 {
        return Err(Error::Precondition("curve has a vanishing end tangent".into()));
    }
    let direction = unit_with_fixed_phase(&t1);
    let tangent_angle = real_angle(&t1, &t2);
    let grid = make_grid(1.0, opts.resolution)?;
    let samples = t_samples
        .iter()
        .map(|&t| (t, transverse_member(g1, g2, a, domain, &grid, &direction, t, opts)))
        .collect();
    Ok(TransverseFamily { direction, tangent_angle, samples })
}

fn unit_with_fixed_phase(v: &CVec) -> CVec {
    let big = v.iter().cloned().fold(Complex64::new(0.0, 0.0), |m, c| if c.norm() > m.norm() * (1.0 + 1e-12) { c } else { m });
    let phase = big.conj() / big.norm();
    v.map(|c| c * phase / cnorm(v))
}

#[allow(clippy::too_many_arguments)]
fn transverse_member(
    g1: &Curve,
    g2: &Curve,
    a: &ComplexMatrixField,
    domain: &DefiningDomain,
    grid: &Grid,
    direction: &CVec,
    t: f64,
    opts: &DiscOptions,
) -> Result<TransverseSample> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("family parameter {t} outside [0, 1)")));
    }
    let center = g1(t);
    let w = DiscMap::affine(grid, &center, direction, 1.0)?;
    let disc = solve_disc_anchored(&w, a, opts.tol, opts.max_iter)?;
    let target = g2(t);
    let (zeta2, distance) = nearest_parameter(&disc, &target);
    if !(distance <= opts.tol) {
        return Err(Error::IntersectionFailed { t, distance });
    }
    let rho = inner_radius(&disc, domain);
    Ok(TransverseSample { t, zeta2, distance, rho, ratio: zeta2.norm() / (1.0 - t), disc })
}

/// Gauss-Newton on `|z(ζ) - target|²` over the interpolated disc, seeded at 0.
fn nearest_parameter(disc: &DiscMap, target: &CVec) -> (Complex64, f64) {
    let limit = disc.grid().radius() * (1.0 - 1e-9);
    let residual_at = |zeta: Complex64| disc.evaluate(zeta).map(|z| z - target);
    let mut zeta = Complex64::new(0.0, 0.0);
    let Some(mut r) = residual_at(zeta) else { return (zeta, f64::INFINITY) };
    let h = 1e-6;
    for _ in 0..50 {
        let (Some(px), Some(py)) = (disc.evaluate(zeta + h), disc.evaluate(zeta + Complex64::new(0.0, h))) else { break };
        let zx = (px - disc.evaluate(zeta).expect("interior point")) / Complex64::new(h, 0.0);
        let zy = (py - disc.evaluate(zeta).expect("interior point")) / Complex64::new(h, 0.0);
        // real least squares in the two unknowns (δx, δy)
        let jt = DMatrix::from_fn(2 * r.len(), 2, |row, col| {
            let v = if col == 0 { zx[row / 2] } else { zy[row / 2] };
            if row % 2 == 0 { v.re } else { v.im }
        });
        let rr = DVector::from_fn(2 * r.len(), |row, _| if row % 2 == 0 { r[row / 2].re } else { r[row / 2].im });
        let Some(step) = (jt.transpose() * &jt).lu().solve(&(jt.transpose() * -rr)) else { break };
        let mut next = zeta + Complex64::new(step[0], step[1]);
        if next.norm() > limit {
            next *= limit / next.norm();
        }
        let Some(rn) = residual_at(next) else { break };
        let done = (next - zeta).norm() < 1e-14;
        zeta = next;
        r = rn;
        if done {
            break;
        }
    }
    (zeta, cnorm(&r))
}

/// Largest `r <= radius` with `ρ(z(r e^{iθ})) < 0` on sampled circles of radii up to `r`.
fn inner_radius(disc: &DiscMap, domain: &DefiningDomain) -> f64 {
    let inside = |r: f64| {
        (1..=4).all(|q| {
            let rr = r * q as f64 / 4.0;
            (0..128).all(|k| {
                let zeta = Complex64::from_polar(rr, 2.0 * std::f64::consts::PI * k as f64 / 128.0);
                disc.evaluate(zeta).is_some_and(|z| domain.rho(&z) < 0.0)
            })
        })
    };
    let radius = disc.grid().radius() * (1.0 - 1e-9);
    if inside(radius) {
        return radius;
    }
    let (mut lo, mut hi) = (0.0, radius);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cvec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_field_returns_the_seed_in_one_step() {
        let g = make_grid(1.0, 32).unwrap();
        let w = DiscMap::affine(&g, &cvec(&[c(0.1, 0.0), c(0.0, 0.2)]), &cvec(&[c(0.5, 0.0), c(0.0, 0.0)]), 1.0).unwrap();
        let z = solve_disc(&w, &ComplexMatrixField::zero(2), 1e-8, 10).unwrap();
        assert_eq!(z.iterations, 1);
        assert_eq!(z.sup_distance(&w).unwrap(), 0.0);
        assert!(psi_j(&w, &ComplexMatrixField::zero(2)).unwrap().sup_distance(&w).unwrap() == 0.0);
    }

    #[test]
    fn constant_seed_is_a_fixed_point() {
        let g = make_grid(1.0, 32).unwrap();
        let p = cvec(&[c(0.3, -0.1)]);
        let w = DiscMap::affine(&g, &p, &cvec(&[c(0.0, 0.0)]), 1.0).unwrap();
        let a = ComplexMatrixField::constant(crate::almost_complex::diag(&[c(0.2, 0.1)]));
        let z = solve_disc(&w, &a, 1e-10, 5).unwrap();
        assert_eq!(z.residual(), 0.0);
        assert_eq!(z.sup_distance(&w).unwrap(), 0.0);
        assert_eq!(psi_j(&w, &a).unwrap().sup_distance(&w).unwrap(), 0.0);
    }

    #[test]
    fn non_holomorphic_seed_rejected() {
        let g = make_grid(1.0, 32).unwrap();
        let w = DiscMap::seed(vec![GridFunction::from_fn(&g, |z| z.conj())]).unwrap();
        let err = solve_disc(&w, &ComplexMatrixField::zero(1), 1e-6, 5).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn chart_escape_names_a_node() {
        let g = make_grid(1.0, 32).unwrap();
        let w = DiscMap::affine(&g, &cvec(&[c(0.0, 0.0)]), &cvec(&[c(1.0, 0.0)]), 2.0).unwrap();
        let a = ComplexMatrixField::zero(1).with_domain(crate::almost_complex::ChartBox::around_origin(1, 1.0));
        match solve_disc(&w, &a, 1e-6, 5).unwrap_err() {
            Error::ChartEscape { node: Some(k), point } => {
                assert!(point[0].re.abs() > 1.0 || point[0].im.abs() > 1.0);
                assert!(g.node(k).z.norm() > 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn large_structure_rejected() {
        let g = make_grid(1.0, 32).unwrap();
        let w = DiscMap::affine(&g, &cvec(&[c(0.0, 0.0)]), &cvec(&[c(1.0, 0.0)]), 0.5).unwrap();
        let a = ComplexMatrixField::constant(crate::almost_complex::diag(&[c(0.7, 0.0)]));
        assert!(matches!(solve_disc(&w, &a, 1e-6, 5), Err(Error::Precondition(_))));
    }

    #[test]
    fn residual_cache_is_reproducible() {
        let g = make_grid(1.0, 32).unwrap();
        let a = ComplexMatrixField::constant(crate::almost_complex::diag(&[c(0.1, 0.0), c(0.0, 0.1)]));
        let w = DiscMap::affine(&g, &cvec(&[c(0.0, 0.0), c(0.0, 0.0)]), &cvec(&[c(0.5, 0.0), c(0.0, 0.5)]), 1.0).unwrap();
        let z = solve_disc(&w, &a, 1e-6, 50).unwrap();
        assert!((z.residual() - z.recompute_residual(&a).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn fixed_phase_direction() {
        let u = unit_with_fixed_phase(&cvec(&[c(0.0, 0.1), c(0.0, -2.0)]));
        assert!(u[1].im.abs() < 1e-15 && u[1].re > 0.99);
        assert!((cnorm(&u) - 1.0).abs() < 1e-15);
    }
}
