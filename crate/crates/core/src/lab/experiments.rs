//! Boundary-limit experiments: curve against region limits, tangent curves
//! compared through disc families, and sampled surveys of a boundary patch.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disc::{real_angle, end_tangent, solve_disc_anchored, transverse_family, Curve, DiscOptions, TANGENCY_ANGLE};
use crate::error::{Error, Result};
use crate::geometry::{filling_discs, first_nongeneric_sample, holomorphic_tangent, is_admissible_curve, DefiningDomain, SubmanifoldPatch};
use crate::lab::functions::TestFunction;
use crate::lab::limits::{admissible_limit, limit_along_curve, LimitEstimate, ShellOptions};
use crate::lab::profile::{estimate_subsolution_profile, graded_cloud, SubsolutionProfile};
use crate::linalg::{cnorm, from_real, CVec};

/// Placement of the profiling cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudOptions {
    pub k_min: u32,
    pub k_max: u32,
    pub per_scale: usize,
    pub lateral: f64,
}

impl Default for CloudOptions {
    fn default() -> Self {
        CloudOptions { k_min: 8, k_max: 22, per_scale: 20, lateral: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabOptions {
    pub seed: u64,
    pub shells: ShellOptions,
    /// Lebesgue exponent `p > 2`.
    pub lp: f64,
    /// Deepest curve parameter `t = 1 - 2^{-k}`.
    pub curve_k_max: u32,
    /// Base points `-i 2^{-k}` of the filling-disc ladder.
    pub ladder: Vec<u32>,
    pub ladder_alpha: f64,
    pub ladder_eps: f64,
    pub disc: DiscOptions,
    pub cloud: CloudOptions,
}

impl Default for LabOptions {
    fn default() -> Self {
        LabOptions {
            seed: 0,
            shells: ShellOptions::default(),
            lp: 4.0,
            curve_k_max: 24,
            ladder: (4..=12).collect(),
            ladder_alpha: 1.0,
            ladder_eps: 0.5,
            disc: DiscOptions { resolution: 32, tol: 1e-6, max_iter: 50 },
            cloud: CloudOptions::default(),
        }
    }
}

/// Independent generator for sub-experiment `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Ordinary least-squares slope of `ln y` against `ln x`, over positive pairs.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn profile_near(f: &TestFunction, d: &DefiningDomain, p: &CVec, opts: &LabOptions, stream: u64) -> Result<SubsolutionProfile> {
    let c = &opts.cloud;
    let cloud = graded_cloud(d, p, c.k_min, c.k_max, c.per_scale, c.lateral, &mut stream_rng(opts.seed, stream))?;
    estimate_subsolution_profile(f, d, &cloud)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionLimit {
    pub alpha: f64,
    pub eps: f64,
    pub estimate: LimitEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    /// Depth `s` of the base point `-i s e_n`.
    pub depth: f64,
    pub radius: f64,
    pub inner_radius: f64,
    /// `sup_{|ζ| <= 1/2} |F(z(ζ)) - F(z(0))|` on the solved disc.
    pub oscillation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindelofReport {
    pub profile: SubsolutionProfile,
    /// Whether the profile admits `F` as a subsolution.
    pub hypotheses_hold: bool,
    pub curve: LimitEstimate,
    pub regions: Vec<RegionLimit>,
    /// Whether the curve and every region converge to values within `tol` of each other.
    pub agree: bool,
    pub ladder: Vec<LadderRow>,
    /// Fitted `ln oscillation / ln s`.
    pub oscillation_exponent: Option<f64>,
    /// `ε(1 - 2/p)` for the ladder's `ε`.
    pub predicted_exponent: f64,
}

fn check_normalized(d: &DefiningDomain, p: &CVec) -> Result<()> {
    let g = d.gradient(p);
    let n = d.dim();
    let off: f64 = (0..2 * n - 1).map(|r| g[r] * g[r]).sum::<f64>().sqrt();
    if !(g[2 * n - 1] > 0.0) || off > 1e-10 * g.norm() {
        return Err(Error::Precondition("domain is not normalized at p: the gradient must point along y_n".into()));
    }
    Ok(())
}

/// Limit along `γ`, admissible limits over `params`, and the filling-disc ladder
/// below `p`, on a domain normalized at `p`.
pub fn chirka_lindelof_experiment(
    f: &TestFunction,
    d: &DefiningDomain,
    p: &CVec,
    gamma: &Curve,
    params: &[(f64, f64)],
    tol: f64,
    opts: &LabOptions,
) -> Result<LindelofReport> {
    check_normalized(d, p)?;
    let profile = profile_near(f, d, p, opts, 0)?;
    let curve = limit_along_curve(f, d, gamma, tol, opts.curve_k_max)?;
    let mut regions = Vec::new();
    for (i, &(alpha, eps)) in params.iter().enumerate() {
        let mut rng = stream_rng(opts.seed, 1 + i as u64);
        regions.push(RegionLimit { alpha, eps, estimate: admissible_limit(f, d, p, alpha, eps, tol, &opts.shells, &mut rng)? });
    }
    let agree = curve.value.is_some_and(|l| {
        regions.iter().all(|r| r.estimate.value.is_some_and(|v| (v - l).norm() <= tol))
    });
    let ladder = filling_ladder(f, d, p, opts)?;
    let oscillation_exponent = log_log_slope(&ladder.iter().map(|r| (r.depth, r.oscillation)).collect::<Vec<_>>());
    Ok(LindelofReport {
        hypotheses_hold: profile.verdict.admits(),
        profile,
        curve,
        regions,
        agree,
        ladder,
        oscillation_exponent,
        predicted_exponent: opts.ladder_eps * (1.0 - 2.0 / opts.lp),
    })
}

fn filling_ladder(f: &TestFunction, d: &DefiningDomain, p: &CVec, opts: &LabOptions) -> Result<Vec<LadderRow>> {
    let h = holomorphic_tangent(d, p)?;
    if h.frame.ncols() == 0 {
        return Err(Error::Precondition("filling discs need complex dimension at least 2".into()));
    }
    let v = from_real(&h.frame.column(0).into_owned());
    let v = &v / Complex64::new(cnorm(&v), 0.0);
    let a = d.structure();
    let mut rows = Vec::new();
    for &k in &opts.ladder {
        let s = 0.5f64.powi(k as i32);
        let fill = filling_discs(d, p, Complex64::new(0.0, -s), &v, opts.ladder_alpha, opts.ladder_eps, opts.disc.resolution)?;
        let disc = solve_disc_anchored(&fill.seed, a, opts.disc.tol, opts.disc.max_iter)?;
        let grid = disc.grid().clone();
        let f0 = f.value(&disc.center())?;
        let mut oscillation = 0.0f64;
        for j in grid.within(0.5) {
            oscillation = oscillation.max((f.value(&disc.point(j))? - f0).norm());
        }
        rows.push(LadderRow { depth: s, radius: fill.radius, inner_radius: fill.inner_radius, oscillation });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentRow {
    pub t: f64,
    /// `|F(γ_1(t)) - F(γ_2(t))|`.
    pub curve_difference: f64,
    /// `|F(z_t(0)) - F(z_t(ζ_2(t)))|` on the solved disc.
    pub disc_difference: f64,
    pub zeta2: Complex64,
    /// `|ζ_2(t)| / (1 - t)`.
    pub ratio: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentReport {
    pub tangent_angle: f64,
    pub rows: Vec<TangentRow>,
    /// Curve differences non-increasing in `t`.
    pub monotone: bool,
    /// Whether the last curve difference is below `tol`.
    pub settled: bool,
    /// Fitted `ln difference / ln(1 - t)`.
    pub decay_rate: Option<f64>,
    /// Fitted `ln ratio / ln(1 - t)`; no rate is asserted.
    pub ratio_rate: Option<f64>,
}

/// `F` along two tangent admissible curves, compared through the transverse disc family.
pub fn tangent_curves_experiment(
    f: &TestFunction,
    d: &DefiningDomain,
    g1: &Curve,
    g2: &Curve,
    ts: &[f64],
    tol: f64,
    opts: &LabOptions,
) -> Result<TangentReport> {
    for (name, g) in [("first", g1), ("second", g2)] {
        let check = is_admissible_curve(d, g);
        if !check.admissible {
            return Err(Error::Precondition(format!("{name} curve is not admissible: {}", check.reasons.join("; "))));
        }
    }
    let angle = real_angle(&end_tangent(g1), &end_tangent(g2));
    if angle > TANGENCY_ANGLE {
        return Err(Error::Precondition(format!("curves are not tangent at the endpoint: angle {angle:e}")));
    }
    let family = transverse_family(g1, g2, d.structure(), d, ts, &opts.disc)?;
    let mut rows = Vec::new();
    for (t, sample) in family.samples {
        let sample = sample?;
        let curve_difference = (f.value(&g1(t))? - f.value(&g2(t))?).norm();
        let on_disc = sample.disc.evaluate(sample.zeta2).ok_or(Error::IntersectionFailed { t, distance: f64::INFINITY })?;
        let disc_difference = (f.value(&sample.disc.center())? - f.value(&on_disc)?).norm();
        rows.push(TangentRow { t, curve_difference, disc_difference, zeta2: sample.zeta2, ratio: sample.ratio, rho: sample.rho });
    }
    let monotone = rows.windows(2).all(|w| w[1].curve_difference <= w[0].curve_difference);
    let settled = rows.last().is_some_and(|r| r.curve_difference < tol);
    let decay_rate = log_log_slope(&rows.iter().map(|r| (1.0 - r.t, r.curve_difference)).collect::<Vec<_>>());
    let ratio_rate = log_log_slope(&rows.iter().map(|r| (1.0 - r.t, r.ratio)).collect::<Vec<_>>());
    Ok(TangentReport { tangent_angle: family.tangent_angle, rows, monotone, settled, decay_rate, ratio_rate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyPoint {
    pub index: usize,
    pub parameters: Vec<f64>,
    pub point: CVec,
    pub estimate: std::result::Result<LimitEstimate, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyReport {
    pub profile: SubsolutionProfile,
    /// False when profiling rejected `F`; no points are then sampled.
    pub accepted: bool,
    pub points: Vec<SurveyPoint>,
    /// Fraction of sampled points with a convergent admissible limit.
    pub fraction: f64,
}

/// Admissible limits at `count` points drawn uniformly from the parameter box of `e`.
#[allow(clippy::too_many_arguments)]
pub fn fatou_survey(
    f: &TestFunction,
    d: &DefiningDomain,
    e: &SubmanifoldPatch,
    count: usize,
    alpha: f64,
    eps: f64,
    tol: f64,
    opts: &LabOptions,
) -> Result<SurveyReport> {
    if let Some(i) = first_nongeneric_sample(d, e)? {
        return Err(Error::NotGeneric(i));
    }
    let mid: Vec<f64> = e.lower.iter().zip(&e.upper).map(|(a, b)| 0.5 * (a + b)).collect();
    let profile = profile_near(f, d, &e.point(&mid), opts, 0)?;
    if !profile.verdict.admits() {
        return Ok(SurveyReport { profile, accepted: false, points: Vec::new(), fraction: 0.0 });
    }
    let mut draw = stream_rng(opts.seed, 1);
    let mut points = Vec::with_capacity(count);
    for index in 0..count {
        let parameters: Vec<f64> = e.lower.iter().zip(&e.upper).map(|(&a, &b)| draw.gen_range(a..b)).collect();
        let point = e.point(&parameters);
        let mut rng = stream_rng(opts.seed, 2 + index as u64);
        let estimate = admissible_limit(f, d, &point, alpha, eps, tol, &opts.shells, &mut rng);
        points.push(SurveyPoint { index, parameters, point, estimate });
    }
    let good = points.iter().filter(|p| p.estimate.as_ref().is_ok_and(|e| e.is_convergent())).count();
    let fraction = if count == 0 { 0.0 } else { good as f64 / count as f64 };
    Ok(SurveyReport { profile, accepted: true, points, fraction })
}
