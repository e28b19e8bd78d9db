//! Fitting `‖∂̄_J F‖ <= C dist(z, bΩ)^{-1/2 + τ}` on a sample cloud.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{boundary_distance, project_to_boundary, DefiningDomain};
use crate::lab::functions::TestFunction;
use crate::linalg::{from_real, to_real, CVec};

/// Smallest accepted ratio between the largest and smallest sampled distance.
pub const MIN_DISTANCE_SPAN: f64 = 1000.0;
/// `‖∂̄_J F‖` at or below which a sample counts as holomorphic.
const HOLOMORPHIC_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileVerdict {
    Holomorphic,
    Subsolution,
    NotSubsolution,
}

impl ProfileVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileVerdict::Holomorphic => "holomorphic",
            ProfileVerdict::Subsolution => "subsolution",
            ProfileVerdict::NotSubsolution => "not a subsolution",
        }
    }

    /// Whether the hypotheses on `F` hold.
    pub fn admits(&self) -> bool {
        !matches!(self, ProfileVerdict::NotSubsolution)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsolutionProfile {
    /// `0` for holomorphic functions.
    pub c: f64,
    /// `+∞` for holomorphic functions.
    pub tau: f64,
    /// Standard error of the fitted slope.
    pub tau_stderr: f64,
    /// `(dist(z, bΩ), ‖∂̄_J F(z)‖)` per sample.
    pub table: Vec<(f64, f64)>,
    /// Root mean square residual of the log-log fit.
    pub fit_residual: f64,
    pub verdict: ProfileVerdict,
}

/// Least-squares fit of `log ‖∂̄_J F‖` against `log dist`, with `τ = 1/2 + slope`
/// and `C` placed at the 95th percentile of the residuals.
pub fn estimate_subsolution_profile(f: &TestFunction, d: &DefiningDomain, samples: &[CVec]) -> Result<SubsolutionProfile> {
    if samples.is_empty() {
        return Err(Error::TooFewScales(0.0));
    }
    let mut table = Vec::with_capacity(samples.len());
    for z in samples {
        let r = d.rho(z);
        if !(r < 0.0) {
            return Err(Error::OutsideDomain(r));
        }
        table.push((boundary_distance(d, z), f.dbar_norm(d.structure(), z)?));
    }
    let (lo, hi) = table.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &(s, _)| (a.min(s), b.max(s)));
    let span = hi / lo;
    if !(span >= MIN_DISTANCE_SPAN) {
        return Err(Error::TooFewScales(span));
    }
    if table.iter().all(|&(_, g)| g <= HOLOMORPHIC_TOL) {
        return Ok(SubsolutionProfile {
            c: 0.0,
            tau: f64::INFINITY,
            tau_stderr: 0.0,
            table,
            fit_residual: 0.0,
            verdict: ProfileVerdict::Holomorphic,
        });
    }
    let points: Vec<(f64, f64)> = table.iter().filter(|&&(_, g)| g > 0.0).map(|&(s, g)| (s.ln(), g.ln())).collect();
    if points.len() < 3 {
        return Err(Error::TooFewScales(span));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut residuals: Vec<f64> = points.iter().map(|p| p.1 - intercept - slope * p.0).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let stderr = (ssr / (m - 2.0).max(1.0) / sxx).sqrt();
    residuals.sort_by(|a, b| a.total_cmp(b));
    let q95 = residuals[((0.95 * (residuals.len() - 1) as f64).round()) as usize];
    let tau = 0.5 + slope;
    let verdict = if tau - 2.0 * stderr > 0.0 { ProfileVerdict::Subsolution } else { ProfileVerdict::NotSubsolution };
    Ok(SubsolutionProfile { c: (intercept + q95).exp(), tau, tau_stderr: stderr, table, fit_residual: (ssr / m).sqrt(), verdict })
}

/// Points at distances `≈ 2^{-k}` from `bΩ`, `k = k_min..=k_max`, placed under
/// boundary points within `lateral` of `p` along `T_p(bΩ)`.
pub fn graded_cloud(
    d: &DefiningDomain,
    p: &CVec,
    k_min: u32,
    k_max: u32,
    per_scale: usize,
    lateral: f64,
    rng: &mut impl Rng,
) -> Result<Vec<CVec>> {
    if k_min > k_max || per_scale == 0 || !(lateral >= 0.0) {
        return Err(Error::InvalidParameter("graded cloud needs k_min <= k_max, samples and lateral >= 0".into()));
    }
    let dim = 2 * d.dim();
    let normal = to_real(&d.normal(p)?);
    let mut out = Vec::new();
    for k in k_min..=k_max {
        let mut made = 0;
        let mut tries = 0;
        while made < per_scale {
            tries += 1;
            if tries > 100 * per_scale {
                return Err(Error::Precondition(format!("could not place cloud points at scale 2^-{k}")));
            }
            let mut t = nalgebra::DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let along = t.dot(&normal);
            t -= &normal * along;
            let len = t.norm();
            if len == 0.0 || len > 1.0 {
                continue;
            }
            let scaled = t * (lateral * rng.gen_range(0.0..1.0f64).sqrt() / len);
            let Ok(b) = project_to_boundary(d, &(p + from_real(&scaled))) else { continue };
            let nb = to_real(&d.normal(&b)?);
            let s = 0.5f64.powi(k as i32) * rng.gen_range(1.0..2.0);
            let q = from_real(&(to_real(&b) - nb * s));
            if d.contains(&q) {
                out.push(q);
                made += 1;
            }
        }
    }
    Ok(out)
}
