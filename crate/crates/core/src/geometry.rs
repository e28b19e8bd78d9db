//! Boundary geometry of a domain `Ω = {ρ < 0}` in a chart, with approach regions.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::almost_complex::{j_from_a, pushforward_a, AffineChange, ChartBox, ComplexMatrixField, CoordinateChange};
use crate::disc::{Curve, DiscMap};
use crate::error::{Error, Result};
use crate::grid::make_grid;
use crate::linalg::{cnorm, from_real, rank, to_real, CMat, CVec, RMat};

/// `|ρ(p)|` below which `p` counts as a boundary point.
pub const BOUNDARY_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-6;
const PROJECTION_STEPS: usize = 20;

type ScalarFn = Arc<dyn Fn(&CVec) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&CVec) -> DVector<f64> + Send + Sync>;

/// `Ω = {ρ < 0}` with the gradient of `ρ` on `ℝ²ⁿ` and the ambient structure.
#[derive(Clone)]
pub struct DefiningDomain {
    n: usize,
    label: String,
    rho: ScalarFn,
    grad: GradientFn,
    a: ComplexMatrixField,
}

impl fmt::Debug for DefiningDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DefiningDomain").field("n", &self.n).field("label", &self.label).finish()
    }
}

impl DefiningDomain {
    /// A domain from `ρ` and, if known, its gradient (otherwise central differences).
    pub fn from_fn(
        n: usize,
        label: &str,
        rho: impl Fn(&CVec) -> f64 + Send + Sync + 'static,
        grad: Option<GradientFn>,
    ) -> Self {
        let rho: ScalarFn = Arc::new(rho);
        let grad = grad.unwrap_or_else(|| {
            let rho = rho.clone();
            Arc::new(move |z: &CVec| {
                let x = to_real(z);
                DVector::from_fn(2 * z.len(), |r, _| {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[r] += FD_STEP;
                    b[r] -= FD_STEP;
                    (rho(&from_real(&a)) - rho(&from_real(&b))) / (2.0 * FD_STEP)
                })
            })
        });
        DefiningDomain { n, label: label.to_string(), rho, grad, a: ComplexMatrixField::zero(n) }
    }

    /// `ρ = y_n`.
    pub fn halfspace(n: usize) -> Self {
        let grad: GradientFn = Arc::new(move |_| {
            let mut g = DVector::zeros(2 * n);
            g[2 * n - 1] = 1.0;
            g
        });
        DefiningDomain::from_fn(n, "halfspace", move |z| z[n - 1].im, Some(grad))
    }

    /// `ρ = |z - c|² - r²`.
    pub fn ball(center: CVec, radius: f64) -> Self {
        let n = center.len();
        let c = center.clone();
        let grad: GradientFn = Arc::new(move |z| to_real(&(z - &c)) * 2.0);
        DefiningDomain::from_fn(n, "ball", move |z| (z - &center).norm_squared() - radius * radius, Some(grad))
    }

    /// `ρ = Σ c_j Π_r x_r^{e_{j,r}}` in the real coordinates `(x_1, y_1, …)`.
    pub fn polynomial(n: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|(c, e)| e.len() != 2 * n || !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("polynomial terms need {} exponents each", 2 * n)));
        }
        let terms = Arc::new(terms);
        let t = terms.clone();
        let rho = move |z: &CVec| {
            let x = to_real(z);
            t.iter().map(|(c, e)| c * e.iter().enumerate().map(|(r, &k)| x[r].powi(k as i32)).product::<f64>()).sum()
        };
        let grad: GradientFn = Arc::new(move |z| {
            let x = to_real(z);
            DVector::from_fn(2 * n, |r, _| {
                terms
                    .iter()
                    .filter(|(_, e)| e[r] > 0)
                    .map(|(c, e)| {
                        c * e
                            .iter()
                            .enumerate()
                            .map(|(s, &k)| if s == r { k as f64 * x[s].powi(k as i32 - 1) } else { x[s].powi(k as i32) })
                            .product::<f64>()
                    })
                    .sum()
            })
        });
        Ok(DefiningDomain::from_fn(n, "custom-poly", rho, Some(grad)))
    }

    pub fn with_structure(mut self, a: ComplexMatrixField) -> Result<Self> {
        if a.dim() != self.n {
            return Err(Error::InvalidParameter(format!("structure of dimension {} on a domain of dimension {}", a.dim(), self.n)));
        }
        self.a = a;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn structure(&self) -> &ComplexMatrixField {
        &self.a
    }

    pub fn rho(&self, z: &CVec) -> f64 {
        (self.rho)(z)
    }

    /// `∇ρ` on `ℝ²ⁿ`.
    pub fn gradient(&self, z: &CVec) -> DVector<f64> {
        (self.grad)(z)
    }

    pub fn contains(&self, z: &CVec) -> bool {
        self.rho(z) < 0.0
    }

    /// `J` at a point, from the complex matrix of the ambient structure.
    pub fn structure_at(&self, z: &CVec) -> Result<RMat> {
        j_from_a(&self.a.eval(z)?)
    }

    /// Unit outward normal at `z` as a vector of ℂⁿ.
    pub fn normal(&self, z: &CVec) -> Result<CVec> {
        let g = self.gradient(z);
        let norm = g.norm();
        if !(norm > 0.0) {
            return Err(Error::RankDeficient("vanishing gradient of the defining function".into()));
        }
        Ok(from_real(&(g / norm)))
    }

    /// Minimum of `|∇ρ|` over samples, for the band condition.
    pub fn min_gradient(&self, samples: &[CVec]) -> f64 {
        samples.iter().map(|z| self.gradient(z).norm()).fold(f64::INFINITY, f64::min)
    }

    fn check_boundary(&self, p: &CVec) -> Result<()> {
        let r = self.rho(p);
        if r.abs() > BOUNDARY_TOL {
            return Err(Error::NotOnBoundary(r));
        }
        Ok(())
    }

    fn check_interior(&self, q: &CVec) -> Result<()> {
        let r = self.rho(q);
        if !(r < 0.0) {
            return Err(Error::OutsideDomain(r));
        }
        Ok(())
    }
}

/// Distance from `q` to `T_p(bΩ)`.
pub fn tangent_plane_distance(d: &DefiningDomain, p: &CVec, q: &CVec) -> f64 {
    let g = d.gradient(p);
    (g.dot(&to_real(&(q - p)))).abs() / g.norm()
}

/// Distance from `q` to `bΩ`: projections onto the level set alternated with
/// normal-line corrections, falling back to `|ρ|/|∇ρ|`.
pub fn boundary_distance(d: &DefiningDomain, q: &CVec) -> f64 {
    let rq = d.rho(q);
    let gq = d.gradient(q);
    let fallback = rq.abs() / gq.norm();
    let xq = to_real(q);
    let newton = |x: &DVector<f64>| {
        let z = from_real(x);
        let g = d.gradient(&z);
        x - &g * (d.rho(&z) / g.norm_squared())
    };
    let mut x = newton(&xq);
    for _ in 0..PROJECTION_STEPS {
        let g = d.gradient(&from_real(&x));
        let nrm = &g / g.norm();
        // the foot of the perpendicular from q lies on the normal line through the nearest point
        let along = (&x - &xq).dot(&nrm);
        let moved = &xq + &nrm * along;
        let next = newton(&(x.clone() * 0.5 + moved * 0.5));
        let done = (&next - &x).norm() < 1e-15 * (1.0 + x.norm());
        x = next;
        if done {
            break;
        }
    }
    let z = from_real(&x);
    if x.iter().all(|v| v.is_finite()) && d.rho(&z).abs() <= 1e-10 * (1.0 + gq.norm()) {
        (&x - &xq).norm()
    } else {
        fallback
    }
}

/// `δ_p(q) = min(dist(q, T_p(bΩ)), dist(q, bΩ))`.
pub fn delta_p(d: &DefiningDomain, p: &CVec, q: &CVec) -> Result<f64> {
    d.check_boundary(p)?;
    d.check_interior(q)?;
    Ok(tangent_plane_distance(d, p, q).min(boundary_distance(d, q)))
}

/// `H_p(bΩ) = ker dρ ∩ ker (dρ∘J)` as an orthonormal real frame and the
/// orthonormal frame of its complement `span{∇ρ, Jᵀ∇ρ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicTangent {
    pub frame: RMat,
    pub complement: RMat,
}

impl HolomorphicTangent {
    /// Euclidean distance from a displacement to the subspace.
    pub fn distance(&self, v: &CVec) -> f64 {
        (self.complement.transpose() * to_real(v)).norm()
    }

    pub fn contains(&self, v: &CVec, tol: f64) -> bool {
        self.distance(v) <= tol * cnorm(v).max(1.0)
    }
}

pub fn holomorphic_tangent(d: &DefiningDomain, p: &CVec) -> Result<HolomorphicTangent> {
    let g = d.gradient(p);
    let j = d.structure_at(p)?;
    let jg = j.transpose() * &g;
    let pair = DMatrix::from_columns(&[g.clone(), jg]);
    if rank(&pair, 1e-10) < 2 {
        return Err(Error::RankDeficient("dρ∘J is proportional to dρ".into()));
    }
    let dim = 2 * d.dim();
    let svd = pair.svd(true, false);
    let u_pair = svd.u.expect("requested U");
    // complete the two left singular vectors to an orthonormal basis
    let mut basis: Vec<DVector<f64>> = (0..2).map(|k| u_pair.column(k).into_owned()).collect();
    for r in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[r] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    let frame = if dim > 2 { DMatrix::from_columns(&basis[2..]) } else { DMatrix::zeros(dim, 0) };
    Ok(HolomorphicTangent { frame, complement: DMatrix::from_columns(&basis[..2]) })
}

/// `d_p(q)`: distance from `q - p` to `H_p(bΩ)`.
pub fn d_p(d: &DefiningDomain, p: &CVec, q: &CVec) -> Result<f64> {
    d.check_boundary(p)?;
    Ok(holomorphic_tangent(d, p)?.distance(&(q - p)))
}

/// The two approach regions at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionKind {
    /// `|q - p| < α δ_p(q)`, `α > 1`.
    Cone,
    /// `d_p(q) < (1 + α) δ_p(q)` and `|q - p|² < α δ_p(q)^{1+ε}`.
    Admissible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachRegion {
    pub p: CVec,
    pub alpha: f64,
    pub eps: f64,
    pub kind: RegionKind,
}

impl ApproachRegion {
    pub fn cone(p: CVec, alpha: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidParameter(format!("cone aperture must exceed 1, got {alpha}")));
        }
        Ok(ApproachRegion { p, alpha, eps: 0.0, kind: RegionKind::Cone })
    }

    pub fn admissible(p: CVec, alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("admissible region needs alpha, eps > 0, got {alpha}, {eps}")));
        }
        Ok(ApproachRegion { p, alpha, eps, kind: RegionKind::Admissible })
    }

    pub fn contains(&self, d: &DefiningDomain, q: &CVec) -> Result<bool> {
        match self.kind {
            RegionKind::Cone => in_cone(d, &self.p, self.alpha, q),
            RegionKind::Admissible => in_admissible(d, &self.p, self.alpha, self.eps, q),
        }
    }
}

pub fn in_cone(d: &DefiningDomain, p: &CVec, alpha: f64, q: &CVec) -> Result<bool> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("cone aperture must exceed 1, got {alpha}")));
    }
    d.check_boundary(p)?;
    if !d.contains(q) {
        return Ok(false);
    }
    Ok(cnorm(&(q - p)) < alpha * delta_p(d, p, q)?)
}

pub fn in_admissible(d: &DefiningDomain, p: &CVec, alpha: f64, eps: f64, q: &CVec) -> Result<bool> {
    if !(alpha > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("admissible region needs alpha, eps > 0, got {alpha}, {eps}")));
    }
    d.check_boundary(p)?;
    in_admissible_with(d, p, &holomorphic_tangent(d, p)?, alpha, eps, q)
}

/// [`in_admissible`] with `H_p(bΩ)` computed once by the caller.
pub fn in_admissible_with(d: &DefiningDomain, p: &CVec, h: &HolomorphicTangent, alpha: f64, eps: f64, q: &CVec) -> Result<bool> {
    if !d.contains(q) {
        return Ok(false);
    }
    let delta = delta_p(d, p, q)?;
    let dist2 = (q - p).norm_squared();
    Ok(h.distance(&(q - p)) < (1.0 + alpha) * delta && dist2 < alpha * delta.powf(1.0 + eps))
}

/// Newton steps `z ← z - ρ(z)∇ρ/|∇ρ|²` onto `bΩ`.
pub fn project_to_boundary(d: &DefiningDomain, z: &CVec) -> Result<CVec> {
    let mut x = to_real(z);
    for _ in 0..50 {
        let w = from_real(&x);
        let r = d.rho(&w);
        if r.abs() <= 1e-13 {
            return Ok(w);
        }
        let g = d.gradient(&w);
        let g2 = g.norm_squared();
        if !(g2 > 0.0) {
            break;
        }
        x -= g * (r / g2);
    }
    let w = from_real(&x);
    let r = d.rho(&w);
    if r.abs() <= BOUNDARY_TOL {
        Ok(w)
    } else {
        Err(Error::NotOnBoundary(r))
    }
}

/// Largest depth `s₀` with every inward-normal point of depth `s <= s₀` admissible
/// in the model half-space: `s^{1-ε} < α` (unbounded for `ε >= 1`).
pub fn normal_depth_bound(alpha: f64, eps: f64) -> f64 {
    if eps >= 1.0 {
        f64::INFINITY
    } else {
        alpha.powf(1.0 / (1.0 - eps))
    }
}

/// Verdict of [`is_admissible_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveCheck {
    pub admissible: bool,
    pub reasons: Vec<String>,
    /// `|⟨∇ρ(p), γ'(1)⟩| / (|∇ρ||γ'(1)|)`.
    pub transversality: f64,
}

/// Checks that `γ` ends on `bΩ`, stays in `Ω` before, is `C¹` on samples and
/// arrives transversally to `T_p(bΩ)`.
pub fn is_admissible_curve(d: &DefiningDomain, gamma: &Curve) -> CurveCheck {
    let mut reasons = Vec::new();
    let p = gamma(1.0);
    if d.rho(&p).abs() > BOUNDARY_TOL {
        reasons.push(format!("endpoint is not on the boundary: rho = {:e}", d.rho(&p)));
    }
    let uniform = (0..200).map(|k| k as f64 / 200.0);
    let dyadic = (1..=30).map(|k| 1.0 - 0.5f64.powi(k));
    if let Some(t) = uniform.chain(dyadic).find(|&t| !d.contains(&gamma(t))) {
        reasons.push(format!("exits domain at t = {t}"));
    }
    let h = 1e-4;
    let derivative = |t: f64| -> CVec {
        if t + h <= 1.0 && t - h >= 0.0 {
            (gamma(t + h) - gamma(t - h)).map(|c| c / (2.0 * h))
        } else if t - h < 0.0 {
            (gamma(t).map(|c| -c * 3.0) + gamma(t + h).map(|c| c * 4.0) - gamma(t + 2.0 * h)).map(|c| c / (2.0 * h))
        } else {
            crate::disc::end_tangent(gamma)
        }
    };
    let speeds: Vec<(f64, CVec)> = (0..=50).map(|k| k as f64 / 50.0).map(|t| (t, derivative(t))).collect();
    if speeds.iter().any(|(_, v)| v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())) {
        reasons.push("derivative is not finite".into());
    }
    let jumps = speeds.windows(2).map(|w| cnorm(&(&w[1].1 - &w[0].1))).fold(0.0, f64::max);
    let scale = speeds.iter().map(|(_, v)| cnorm(v)).fold(0.0, f64::max);
    if jumps > 0.5 * scale.max(1e-12) + 1e-9 {
        reasons.push(format!("derivative jumps by {jumps:e} between samples"));
    }
    let tangent = crate::disc::end_tangent(gamma);
    let g = d.gradient(&p);
    let transversality = g.dot(&to_real(&tangent)).abs() / (g.norm() * cnorm(&tangent)).max(f64::MIN_POSITIVE);
    if !(transversality >= 1e-6) {
        reasons.push(format!("tangent at the endpoint lies in T_p(bΩ): transversality {transversality:e}"));
    }
    CurveCheck { admissible: reasons.is_empty(), reasons, transversality }
}

type PatchFn = Arc<dyn Fn(&[f64]) -> CVec + Send + Sync>;

/// A `k`-parameter patch `u ↦ E(u)` over a parameter box.
#[derive(Clone)]
pub struct SubmanifoldPatch {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    map: PatchFn,
}

impl fmt::Debug for SubmanifoldPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubmanifoldPatch").field("lower", &self.lower).field("upper", &self.upper).finish()
    }
}

impl SubmanifoldPatch {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, map: impl Fn(&[f64]) -> CVec + Send + Sync + 'static) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("patch parameter box is empty".into()));
        }
        Ok(SubmanifoldPatch { lower, upper, map: Arc::new(map) })
    }

    /// `(e^{iθ_1}, …, e^{iθ_n}) / √n` on the unit sphere of ℂⁿ.
    pub fn clifford_torus(n: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != n {
            return Err(Error::InvalidParameter(format!("torus patch of ℂ^{n} needs {n} angles")));
        }
        let s = 1.0 / (n as f64).sqrt();
        SubmanifoldPatch::new(lower, upper, move |u| CVec::from_iterator(u.len(), u.iter().map(|&t| Complex64::from_polar(s, t))))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn point(&self, u: &[f64]) -> CVec {
        (self.map)(u)
    }

    /// Columns `∂E/∂u_j` as real vectors of `ℝ²ⁿ`.
    pub fn frame(&self, u: &[f64]) -> RMat {
        let cols: Vec<DVector<f64>> = (0..self.dim())
            .map(|j| {
                let (mut a, mut b) = (u.to_vec(), u.to_vec());
                a[j] += FD_STEP;
                b[j] -= FD_STEP;
                to_real(&(self.point(&a) - self.point(&b))) / (2.0 * FD_STEP)
            })
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// Parameter points of the `m^k` lattice of cell centers of the box.
    pub fn lattice(&self, m: usize) -> Vec<Vec<f64>> {
        let k = self.dim();
        (0..m.pow(k as u32))
            .map(|mut code| {
                (0..k)
                    .map(|j| {
                        let i = code % m;
                        code /= m;
                        self.lower[j] + (i as f64 + 0.5) / m as f64 * (self.upper[j] - self.lower[j])
                    })
                    .collect()
            })
            .collect()
    }

    /// `sup |ρ|` over parameter samples.
    pub fn boundary_defect(&self, d: &DefiningDomain, samples: &[Vec<f64>]) -> f64 {
        samples.iter().map(|u| d.rho(&self.point(u)).abs()).fold(0.0, f64::max)
    }
}

/// Whether `T E + J T E` spans `ℝ²ⁿ` at every lattice sample (`4^k` points).
pub fn is_generic(d: &DefiningDomain, e: &SubmanifoldPatch) -> Result<bool> {
    Ok(first_nongeneric_sample(d, e)?.is_none())
}

/// Index into [`SubmanifoldPatch::lattice`]`(4)` of the first sample where the patch is not generic.
pub fn first_nongeneric_sample(d: &DefiningDomain, e: &SubmanifoldPatch) -> Result<Option<usize>> {
    let dim = 2 * d.dim();
    for (index, u) in e.lattice(4).into_iter().enumerate() {
        let frame = e.frame(&u);
        if rank(&frame, 1e-8) < e.dim() {
            return Err(Error::RankDeficient(format!("patch frame at {u:?}")));
        }
        let j = d.structure_at(&e.point(&u))?;
        let jf = &j * &frame;
        let both = DMatrix::from_fn(dim, 2 * e.dim(), |r, c| if c < e.dim() { frame[(r, c)] } else { jf[(r, c - e.dim())] });
        if rank(&both, 1e-8) < dim {
            return Ok(Some(index));
        }
    }
    Ok(None)
}

/// A filling disc `ζ ↦ q₀ + r ζ v` at the base point `q₀ = p + z_n⁰ e_n`.
#[derive(Debug, Clone)]
pub struct FillingDisc {
    pub base: CVec,
    pub direction: CVec,
    /// Radius keeping every sampled disc point in `A_{α,ε}(p)`.
    pub radius: f64,
    /// Radius of `ζ ↦ q₀ + ζ v` kept inside `Ω` (capped at 1).
    pub inner_radius: f64,
    pub seed: DiscMap,
}

/// Circle samples used to verify filling discs.
const FILL_ANGLES: usize = 32;

pub fn filling_discs(
    d: &DefiningDomain,
    p: &CVec,
    zn0: Complex64,
    v: &CVec,
    alpha: f64,
    eps: f64,
    resolution: usize,
) -> Result<FillingDisc> {
    if !(alpha > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("filling discs need alpha, eps > 0, got {alpha}, {eps}")));
    }
    let n = d.dim();
    d.check_boundary(p)?;
    if v.len() != n || (cnorm(v) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("disc direction must be a unit vector".into()));
    }
    let h = holomorphic_tangent(d, p)?;
    if !h.contains(v, 1e-10) {
        return Err(Error::Precondition("disc direction is not in the holomorphic tangent space".into()));
    }
    let mut base = p.clone();
    base[n - 1] += zn0;
    d.check_interior(&base)?;
    let delta = delta_p(d, p, &base)?;
    if !(d_p(d, p, &base)? < (1.0 + alpha) * delta) {
        return Err(Error::Precondition("base point violates the normal aperture condition".into()));
    }
    let room = alpha * delta.powf(1.0 + eps) - (&base - p).norm_squared();
    if !(room > 0.0) {
        return Err(Error::Precondition("base point lies outside the admissible region".into()));
    }
    let on_disc = |r: f64, rr: f64, k: usize| -> CVec {
        let zeta = Complex64::from_polar(rr, 2.0 * std::f64::consts::PI * k as f64 / FILL_ANGLES as f64);
        &base + v.map(|c| c * zeta * r)
    };
    let admitted = |r: f64| -> Result<bool> {
        for q in 1..=4 {
            for k in 0..FILL_ANGLES {
                if !in_admissible(d, p, alpha, eps, &on_disc(r, q as f64 / 4.0, k))? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    let mut radius = 0.95 * room.sqrt();
    let mut shrinks = 0;
    while !admitted(radius)? {
        radius *= 0.9;
        shrinks += 1;
        if shrinks > 200 {
            return Err(Error::Precondition("no admissible filling disc radius".into()));
        }
    }
    let inside = |r: f64| (1..=4).all(|q| (0..FILL_ANGLES).all(|k| d.contains(&on_disc(1.0, r * q as f64 / 4.0, k))));
    let inner_radius = if inside(1.0) {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid
            } else {
                hi = mid
            }
        }
        lo
    };
    let grid = make_grid(1.0, resolution)?;
    let seed = DiscMap::affine(&grid, &base, v, radius)?;
    Ok(FillingDisc { base, direction: v.clone(), radius, inner_radius, seed })
}

/// A domain moved so that `p ↦ 0` and `∇ρ(p)` points along `y_n`, with `ρ`
/// divided by `|∇ρ(p)|`, so that `ρ'(w) = y_n + o(|w|)`.
#[derive(Debug, Clone)]
pub struct NormalizedDomain {
    pub change: AffineChange,
    pub domain: DefiningDomain,
    /// `sup |ρ'(w) - y_n| / |w|` on a sphere of radius `1e-4`.
    pub tangency_defect: f64,
}

pub fn normalize_domain(d: &DefiningDomain, p: &CVec) -> Result<NormalizedDomain> {
    d.check_boundary(p)?;
    let n = d.dim();
    let nu = d.normal(p)?;
    let scale = d.gradient(p).norm();
    // unitary U with U ν = i e_n: rows of U are the conjugates of an orthonormal basis ending in -iν
    let mut basis: Vec<CVec> = Vec::new();
    let last = nu.map(|c| c * Complex64::new(0.0, -1.0));
    for r in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = CVec::zeros(n);
        v[r] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in basis.iter().chain(std::iter::once(&last)) {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = cnorm(&v);
        if norm > 1e-8 {
            basis.push(v / Complex64::new(norm, 0.0));
        }
    }
    basis.push(last);
    let u_star = CMat::from_columns(&basis);
    let u = u_star.adjoint();
    let change = AffineChange::new(u.clone(), CMat::zeros(n, n), -(&u * p))?;
    let back = {
        let (us, p) = (u_star.clone(), p.clone());
        move |w: &CVec| &p + &us * w
    };
    let rho = {
        let (d, back) = (d.clone(), back.clone());
        move |w: &CVec| d.rho(&back(w)) / scale
    };
    let grad: GradientFn = {
        let (d, r) = (d.clone(), crate::linalg::real_linear(&u));
        Arc::new(move |w: &CVec| &r * d.gradient(&back(w)) / scale)
    };
    let a = pushforward_a(d.structure(), Arc::new(change.clone()), ChartBox::unbounded(n))?;
    let domain = DefiningDomain { n, label: format!("{} (normalized)", d.label), rho: Arc::new(rho), grad, a };
    let r0 = 1e-4;
    let mut defect = 0.0f64;
    for r in 0..2 * n {
        for sign in [-1.0, 1.0] {
            let mut x = DVector::zeros(2 * n);
            x[r] = sign * r0;
            let w = from_real(&x);
            defect = defect.max((domain.rho(&w) - w[n - 1].im).abs() / r0);
        }
    }
    if defect > 1e-2 {
        return Err(Error::Precondition(format!("normalized defining function is not tangent to y_n: defect {defect:e}")));
    }
    let _ = change.apply(p);
    Ok(NormalizedDomain { change, domain, tangency_defect: defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cvec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn origin2() -> CVec {
        CVec::zeros(2)
    }

    #[test]
    fn flat_distances() {
        let d = DefiningDomain::halfspace(2);
        let q = cvec(&[c(0.0, 0.0), c(0.0, -0.3)]);
        assert!((delta_p(&d, &origin2(), &q).unwrap() - 0.3).abs() < 1e-15);
        let q = cvec(&[c(5.0, 0.0), c(0.0, -0.3)]);
        assert!((delta_p(&d, &origin2(), &q).unwrap() - 0.3).abs() < 1e-15);
        assert!((d_p(&d, &origin2(), &q).unwrap() - 0.3).abs() < 1e-14);
        assert!(d_p(&d, &origin2(), &cvec(&[c(0.4, -0.2), c(0.0, 0.0)])).unwrap() < 1e-15);
    }

    #[test]
    fn preconditions_reported() {
        let d = DefiningDomain::halfspace(1);
        assert!(matches!(delta_p(&d, &cvec(&[c(0.0, -0.1)]), &cvec(&[c(0.0, -0.2)])), Err(Error::NotOnBoundary(_))));
        assert!(matches!(delta_p(&d, &cvec(&[c(0.0, 0.0)]), &cvec(&[c(0.0, 0.2)])), Err(Error::OutsideDomain(_))));
        assert!(in_cone(&d, &cvec(&[c(0.0, 0.0)]), 1.0, &cvec(&[c(0.0, -0.2)])).is_err());
        assert!(in_admissible(&d, &cvec(&[c(0.0, 0.0)]), 1.0, 0.0, &cvec(&[c(0.0, -0.2)])).is_err());
    }

    #[test]
    fn sphere_distances() {
        let d = DefiningDomain::ball(origin2(), 1.0);
        let p = cvec(&[c(0.0, 0.0), c(0.0, -1.0)]);
        for s in [0.3, 0.1, 0.01] {
            let q = cvec(&[c(0.0, 0.0), c(0.0, -1.0 + s)]);
            assert!((delta_p(&d, &p, &q).unwrap() - s).abs() < 1e-12);
        }
        let q = cvec(&[c(0.3, 0.2), c(-0.1, 0.4)]);
        assert!((boundary_distance(&d, &q) - (1.0 - cnorm(&q))).abs() < 1e-12);
    }

    #[test]
    fn cone_examples() {
        let d = DefiningDomain::halfspace(2);
        let s = 0.01;
        assert!(in_cone(&d, &origin2(), 1.01, &cvec(&[c(0.0, 0.0), c(0.0, -s)])).unwrap());
        assert!(!in_cone(&d, &origin2(), 2.0, &cvec(&[c(3.0 * s, 0.0), c(0.0, -s)])).unwrap());
    }

    #[test]
    fn admissible_examples() {
        let d = DefiningDomain::halfspace(2);
        let (alpha, eps) = (1.0, 0.5);
        for s in [1e-2, 1e-3, 1e-4] {
            assert!(in_admissible(&d, &origin2(), alpha, eps, &cvec(&[c(0.0, 0.0), c(0.0, -s)])).unwrap());
            let x = s.powf((1.0 + eps) / 2.0) * (alpha / 2.0f64).sqrt();
            assert!(in_admissible(&d, &origin2(), alpha, eps, &cvec(&[c(x, 0.0), c(0.0, -s)])).unwrap());
            assert!(!in_admissible(&d, &origin2(), alpha, eps, &cvec(&[c(s.sqrt(), 0.0), c(0.0, -s)])).unwrap());
        }
    }

    #[test]
    fn normal_depth_bound_matches_membership() {
        let d = DefiningDomain::halfspace(1);
        let (alpha, eps) = (0.5, 0.5);
        let s0 = normal_depth_bound(alpha, eps);
        assert!((s0 - 0.25).abs() < 1e-15);
        assert!(in_admissible(&d, &cvec(&[c(0.0, 0.0)]), alpha, eps, &cvec(&[c(0.0, -0.99 * s0)])).unwrap());
        assert!(!in_admissible(&d, &cvec(&[c(0.0, 0.0)]), alpha, eps, &cvec(&[c(0.0, -1.01 * s0)])).unwrap());
    }

    #[test]
    fn holomorphic_tangent_of_the_model() {
        let d = DefiningDomain::halfspace(2);
        let h = holomorphic_tangent(&d, &origin2()).unwrap();
        assert_eq!(h.frame.ncols(), 2);
        assert!(h.contains(&cvec(&[c(0.3, -0.7), c(0.0, 0.0)]), 1e-14));
        assert!(!h.contains(&cvec(&[c(0.0, 0.0), c(1.0, 0.0)]), 1e-3));
    }

    #[test]
    fn curves() {
        let d = DefiningDomain::halfspace(2);
        let normal: Curve = Arc::new(|t| cvec(&[c(0.0, 0.0), c(0.0, -(1.0 - t))]));
        assert!(is_admissible_curve(&d, &normal).admissible);
        let tangential: Curve = Arc::new(|t| cvec(&[c(1.0 - t, 0.0), c(0.0, -(1.0 - t).powi(2))]));
        let check = is_admissible_curve(&d, &tangential);
        assert!(!check.admissible);
        assert!(check.reasons.iter().any(|r| r.contains("T_p")));
        let leaving: Curve = Arc::new(|t| cvec(&[c(0.0, 0.0), c(0.0, -(1.0 - t) * (t - 0.5))]));
        let check = is_admissible_curve(&d, &leaving);
        assert!(check.reasons.iter().any(|r| r.contains("exits domain")));
    }

    #[test]
    fn generic_patches() {
        let d = DefiningDomain::halfspace(2);
        let real = SubmanifoldPatch::new(vec![-1.0, -1.0], vec![1.0, 1.0], |u| cvec(&[c(u[0], 0.0), c(u[1], 0.0)])).unwrap();
        assert!(is_generic(&d, &real).unwrap());
        let complex = SubmanifoldPatch::new(vec![-1.0, -1.0], vec![1.0, 1.0], |u| cvec(&[c(u[0], u[1]), c(0.0, 0.0)])).unwrap();
        assert!(!is_generic(&d, &complex).unwrap());
        let sphere = DefiningDomain::ball(origin2(), 1.0);
        let torus = SubmanifoldPatch::clifford_torus(2, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(torus.boundary_defect(&sphere, &torus.lattice(5)) < 1e-12);
        assert!(is_generic(&sphere, &torus).unwrap());
    }

    #[test]
    fn filling_disc_radius_scales() {
        let d = DefiningDomain::halfspace(2);
        let v = cvec(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let mut ratios = Vec::new();
        for k in 4..10 {
            let s = 0.5f64.powi(k);
            let disc = filling_discs(&d, &origin2(), c(0.0, -s), &v, 1.0, 0.5, 16).unwrap();
            assert_eq!(disc.inner_radius, 1.0);
            ratios.push(disc.radius / s.powf(0.75));
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 2.0, "{ratios:?}");
        let bad = cvec(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(filling_discs(&d, &origin2(), c(0.0, -0.01), &bad, 1.0, 0.5, 16).is_err());
    }

    #[test]
    fn normalization_of_a_sphere_point() {
        let d = DefiningDomain::ball(origin2(), 1.0);
        let p = cvec(&[c(0.6, 0.0), c(0.0, 0.8)]);
        let nd = normalize_domain(&d, &p).unwrap();
        assert!(nd.change.apply(&p).norm() < 1e-14);
        let g = nd.domain.gradient(&origin2());
        assert!((g[3] - 1.0).abs() < 1e-12 && g.rows(0, 3).norm() < 1e-12);
        assert!(nd.tangency_defect < 1e-3);
    }
}
