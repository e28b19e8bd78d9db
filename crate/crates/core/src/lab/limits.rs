//! Numerical limits along curves and through admissible regions, decided by
//! Cauchy tails over dyadic scales.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::disc::Curve;
use crate::error::{Error, Result};
use crate::geometry::{delta_p, holomorphic_tangent, in_admissible_with, is_admissible_curve, normal_depth_bound, DefiningDomain};
use crate::lab::functions::TestFunction;
use crate::linalg::{from_real, to_real, CVec};

/// Number of trailing scales that decide a verdict.
pub const TAIL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitVerdict {
    Convergent,
    Divergent,
}

/// One dyadic scale: a curve parameter `t_k` or an admissible shell `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scale {
    pub k: u32,
    /// `F(γ(t_k))` or the shell mean.
    pub value: Complex64,
    /// Diameter of the sampled values (zero on curves).
    pub spread: f64,
    /// Cauchy-tail width: the spread or the jump from the previous scale, whichever is larger.
    pub width: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    /// The limit, present only for convergent verdicts.
    pub value: Option<Complex64>,
    pub scales: Vec<Scale>,
    pub tol: f64,
    pub verdict: LimitVerdict,
}

impl LimitEstimate {
    fn decide(scales: Vec<Scale>, tol: f64) -> Self {
        let ok = tail_contracts(&scales.iter().map(|s| s.width).collect::<Vec<_>>(), tol);
        let value = if ok { scales.last().map(|s| s.value) } else { None };
        LimitEstimate { value, scales, tol, verdict: if ok { LimitVerdict::Convergent } else { LimitVerdict::Divergent } }
    }

    pub fn is_convergent(&self) -> bool {
        self.verdict == LimitVerdict::Convergent
    }

    /// Value at the deepest scale, whatever the verdict.
    pub fn last(&self) -> Complex64 {
        self.scales.last().map_or(Complex64::new(f64::NAN, f64::NAN), |s| s.value)
    }
}

/// Whether the last [`TAIL`] widths are below `tol` and non-increasing.
pub fn tail_contracts(widths: &[f64], tol: f64) -> bool {
    if widths.len() < TAIL {
        return false;
    }
    let tail = &widths[widths.len() - TAIL..];
    tail.iter().all(|&w| w < tol) && tail.windows(2).all(|w| w[1] <= w[0])
}

/// `F∘γ` at `t_k = 1 - 2^{-k}`, `k = 3..=k_max`.
pub fn limit_along_curve(f: &TestFunction, d: &DefiningDomain, gamma: &Curve, tol: f64, k_max: u32) -> Result<LimitEstimate> {
    if !(tol > 0.0) || k_max < 3 + TAIL as u32 {
        return Err(Error::InvalidParameter(format!("need tol > 0 and k_max >= {}", 3 + TAIL)));
    }
    let check = is_admissible_curve(d, gamma);
    if !check.admissible {
        return Err(Error::Precondition(format!("curve is not admissible: {}", check.reasons.join("; "))));
    }
    let mut scales: Vec<Scale> = Vec::new();
    for k in 3..=k_max {
        let z = gamma(1.0 - 0.5f64.powi(k as i32));
        let r = d.rho(&z);
        if !(r < 0.0) {
            return Err(Error::OutsideDomain(r));
        }
        let value = f.value(&z)?;
        let width = scales.last().map_or(f64::INFINITY, |s| (value - s.value).norm());
        scales.push(Scale { k, value, spread: 0.0, width, samples: 1 });
    }
    Ok(LimitEstimate::decide(scales, tol))
}

/// Rejection sampling settings for admissible shells.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellOptions {
    /// First shell; by default the first one on which the inward normal is admissible.
    pub first: Option<u32>,
    pub shells: usize,
    pub per_shell: usize,
    /// Proposals per shell before giving up.
    pub cap: usize,
    /// Fewest accepted samples for a shell to count as non-empty.
    pub min_samples: usize,
}

impl Default for ShellOptions {
    fn default() -> Self {
        ShellOptions { first: None, shells: 16, per_shell: 200, cap: 100_000, min_samples: 10 }
    }
}

/// A real frame adapted to `p`: inward normal, the complex normal direction of
/// `T_p(bΩ)`, and `H_p(bΩ)`.
struct AdaptedFrame {
    normal: DVector<f64>,
    complex_normal: DVector<f64>,
    tangent: Vec<DVector<f64>>,
}

fn adapted_frame(d: &DefiningDomain, p: &CVec) -> Result<(AdaptedFrame, crate::geometry::HolomorphicTangent)> {
    let h = holomorphic_tangent(d, p)?;
    let normal = to_real(&d.normal(p)?);
    // the complement of H_p is span{ν, u}; pick the column least aligned with ν
    let mut best: Option<DVector<f64>> = None;
    for c in 0..h.complement.ncols() {
        let col = h.complement.column(c).into_owned();
        let v = &col - &normal * col.dot(&normal);
        if best.as_ref().is_none_or(|b| v.norm() > b.norm()) {
            best = Some(v);
        }
    }
    let u = best.expect("two complement columns");
    let complex_normal = &u / u.norm();
    let tangent = (0..h.frame.ncols()).map(|c| h.frame.column(c).into_owned()).collect();
    Ok((AdaptedFrame { normal, complex_normal, tangent }, h))
}

/// Samples of `A_{α,ε}(p) ∩ {2^{-k-1} <= δ_p <= 2^{-k}}`.
pub fn sample_shell(
    d: &DefiningDomain,
    p: &CVec,
    alpha: f64,
    eps: f64,
    k: u32,
    opts: &ShellOptions,
    rng: &mut impl Rng,
) -> Result<Vec<CVec>> {
    let (frame, h) = adapted_frame(d, p)?;
    shell_points(d, p, &frame, &h, alpha, eps, k, opts, rng)
}

#[allow(clippy::too_many_arguments)]
fn shell_points(
    d: &DefiningDomain,
    p: &CVec,
    frame: &AdaptedFrame,
    h: &crate::geometry::HolomorphicTangent,
    alpha: f64,
    eps: f64,
    k: u32,
    opts: &ShellOptions,
    rng: &mut impl Rng,
) -> Result<Vec<CVec>> {
    let hi = 0.5f64.powi(k as i32);
    let lo = 0.5 * hi;
    let radius = (alpha * hi.powf(1.0 + eps)).sqrt();
    let normal_reach = ((1.0 + alpha) * hi).min(radius);
    let x0 = to_real(p);
    let m = frame.tangent.len();
    let mut out = Vec::with_capacity(opts.per_shell);
    for _ in 0..opts.cap {
        if out.len() == opts.per_shell {
            break;
        }
        let s = rng.gen_range(0.9 * lo..1.1 * hi);
        let c = rng.gen_range(-normal_reach..normal_reach);
        let mut x = &x0 - &frame.normal * s + &frame.complex_normal * c;
        if m > 0 {
            let dir: Vec<f64> = (0..m).map(|_| standard_normal(rng)).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = radius * rng.gen_range(0.0..1.0f64).powf(1.0 / m as f64);
            for (v, t) in dir.iter().zip(&frame.tangent) {
                x += t * (v * r / len);
            }
        }
        let q = from_real(&x);
        if !d.contains(&q) {
            continue;
        }
        let delta = delta_p(d, p, &q)?;
        if delta < lo || delta > hi {
            continue;
        }
        if in_admissible_with(d, p, h, alpha, eps, &q)? {
            out.push(q);
        }
    }
    if out.len() < opts.min_samples {
        return Err(Error::EmptyShell(k as usize));
    }
    Ok(out)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// First shell whose depth range lies inside the admissible normal segment.
pub fn default_first_shell(alpha: f64, eps: f64) -> u32 {
    let s0 = normal_depth_bound(alpha, eps).min(0.25);
    ((1.0 / s0).log2().ceil() as u32).max(2)
}

/// Shell means and spreads of `F` over `A_{α,ε}(p)`.
#[allow(clippy::too_many_arguments)]
pub fn admissible_limit(
    f: &TestFunction,
    d: &DefiningDomain,
    p: &CVec,
    alpha: f64,
    eps: f64,
    tol: f64,
    opts: &ShellOptions,
    rng: &mut impl Rng,
) -> Result<LimitEstimate> {
    if !(alpha > 0.0) || !(eps > 0.0) || !(tol > 0.0) || opts.shells < TAIL {
        return Err(Error::InvalidParameter(format!("need alpha, eps, tol > 0 and shells >= {TAIL}")));
    }
    let r = d.rho(p);
    if r.abs() > crate::geometry::BOUNDARY_TOL {
        return Err(Error::NotOnBoundary(r));
    }
    let (frame, h) = adapted_frame(d, p)?;
    let first = opts.first.unwrap_or_else(|| default_first_shell(alpha, eps));
    let mut scales: Vec<Scale> = Vec::new();
    for k in first..first + opts.shells as u32 {
        let points = shell_points(d, p, &frame, &h, alpha, eps, k, opts, rng)?;
        let values = points.iter().map(|q| f.value(q)).collect::<Result<Vec<_>>>()?;
        let mean = values.iter().sum::<Complex64>() / values.len() as f64;
        let mut spread = 0.0f64;
        for (i, a) in values.iter().enumerate() {
            for b in &values[i + 1..] {
                spread = spread.max((a - b).norm());
            }
        }
        let jump = scales.last().map_or(f64::INFINITY, |s| (mean - s.value).norm());
        scales.push(Scale { k, value: mean, spread, width: spread.max(jump), samples: values.len() });
    }
    Ok(LimitEstimate::decide(scales, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cvec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn normal() -> Curve {
        Arc::new(|t| cvec(&[c(0.0, 0.0), c(0.0, -(1.0 - t))]))
    }

    #[test]
    fn tail_rule() {
        assert!(tail_contracts(&[1.0, 0.5, 1e-3, 1e-3, 1e-4], 1e-2));
        assert!(!tail_contracts(&[1e-3, 1e-4, 1e-3], 1e-2));
        assert!(!tail_contracts(&[1e-3, 1e-4], 1e-2));
        assert!(!tail_contracts(&[1e-3, 1e-1, 1e-4], 1e-2));
    }

    #[test]
    fn continuous_function_along_the_normal() {
        let d = DefiningDomain::halfspace(2);
        let est = limit_along_curve(&TestFunction::exp_last(2), &d, &normal(), 1e-6, 30).unwrap();
        assert!(est.is_convergent());
        assert!((est.value.unwrap() - c(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn perturbation_vanishes_on_the_normal() {
        let d = DefiningDomain::halfspace(2);
        let est = limit_along_curve(&TestFunction::conj_depth(&d, 0.1), &d, &normal(), 1e-6, 20).unwrap();
        assert_eq!(est.value, Some(c(0.0, 0.0)));
    }

    #[test]
    fn oscillation_never_settles() {
        let d = DefiningDomain::halfspace(2);
        let est = limit_along_curve(&TestFunction::log_oscillator(&d), &d, &normal(), 1e-2, 40).unwrap();
        assert_eq!(est.verdict, LimitVerdict::Divergent);
        assert!(est.value.is_none());
    }

    #[test]
    fn inadmissible_curve_refused() {
        let d = DefiningDomain::halfspace(2);
        let tangential: Curve = Arc::new(|t| cvec(&[c(1.0 - t, 0.0), c(0.0, -(1.0 - t).powi(2))]));
        assert!(matches!(limit_along_curve(&TestFunction::exp_last(2), &d, &tangential, 1e-2, 20), Err(Error::Precondition(_))));
    }

    #[test]
    fn shells_hold_admissible_points_at_the_right_depth() {
        let d = DefiningDomain::halfspace(2);
        let p = CVec::zeros(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in [4, 8, 12] {
            let pts = sample_shell(&d, &p, 1.0, 0.5, k, &ShellOptions::default(), &mut rng).unwrap();
            assert_eq!(pts.len(), 200);
            for q in &pts {
                let delta = delta_p(&d, &p, q).unwrap();
                assert!(delta >= 0.5f64.powi(k as i32 + 1) && delta <= 0.5f64.powi(k as i32));
                assert!(crate::geometry::in_admissible(&d, &p, 1.0, 0.5, q).unwrap());
            }
        }
    }

    #[test]
    fn admissible_limits_of_the_library() {
        let d = DefiningDomain::halfspace(2);
        let p = CVec::zeros(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let opts = ShellOptions::default();
        let est = admissible_limit(&TestFunction::exp_last(2), &d, &p, 1.0, 0.5, 1e-2, &opts, &mut rng).unwrap();
        assert!(est.is_convergent());
        assert!((est.value.unwrap() - c(1.0, 0.0)).norm() < 1e-2);
        let est = admissible_limit(&TestFunction::conj_depth(&d, 0.1), &d, &p, 1.0, 0.5, 1e-2, &opts, &mut rng).unwrap();
        assert!(est.is_convergent());
        assert!(est.value.unwrap().norm() < 1e-2);
        let est = admissible_limit(&TestFunction::phase(2), &d, &p, 1.0, 0.5, 1e-2, &opts, &mut rng).unwrap();
        assert_eq!(est.verdict, LimitVerdict::Divergent);
        assert!(est.scales.iter().all(|s| s.spread > 1.8), "{:?}", est.scales.iter().map(|s| s.spread).collect::<Vec<_>>());
    }

    #[test]
    fn too_thin_regions_report_the_shell() {
        let d = DefiningDomain::halfspace(2);
        let opts = ShellOptions { first: Some(30), cap: 50, ..ShellOptions::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = admissible_limit(&TestFunction::exp_last(2), &d, &CVec::zeros(2), 1e-9, 5.0, 1e-2, &opts, &mut rng).unwrap_err();
        assert_eq!(err, Error::EmptyShell(30));
    }
}
