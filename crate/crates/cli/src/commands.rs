//! The subcommands: each turns a [`Config`] into report rows, plots and findings.

use std::sync::Arc;

use almost_fatou::cauchy_green::selftest;
use almost_fatou::disc::{real_angle, solve_disc, Curve, DiscMap, DiscOptions};
use almost_fatou::geometry::{d_p, delta_p, holomorphic_tangent, in_admissible_with, in_cone, DefiningDomain, SubmanifoldPatch};
use almost_fatou::grid::make_grid;
use almost_fatou::lab::*;
use almost_fatou::linalg::{cnorm, CVec};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::config::{Config, ConfigError, DomainSpec, FunctionSpec};
use crate::plot::{Plot, Series};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lab(#[from] almost_fatou::Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    /// `2` for problems with the request, `1` for failures of the computation itself.
    pub fn exit_code(&self) -> u8 {
        use almost_fatou::Error as E;
        match self {
            CliError::Lab(E::NonConvergence { .. } | E::IntersectionFailed { .. } | E::EmptyShell(_) | E::ChartEscape { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub rows: Vec<Row>,
    pub plots: Vec<Plot>,
    /// Assertions that failed; empty when the command passes.
    pub findings: Vec<String>,
    pub summary: Vec<String>,
}

impl Report {
    fn check(&mut self, ok: bool, what: String) {
        if !ok {
            self.findings.push(what);
        }
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn status(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn unit(n: usize, k: usize, value: Complex64) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = value;
    v
}

pub fn cg_selftest(cfg: &Config) -> Result<Report, CliError> {
    let n = cfg.resolution.unwrap_or(256);
    let tol = cfg.tol.unwrap_or(1e-2);
    let mut resolutions = vec![n / 2, n];
    if n / 4 >= 16 && (n / 4).is_multiple_of(2) {
        resolutions.insert(0, n / 4);
    }
    let tests = resolutions.iter().map(|&r| selftest(r)).collect::<Result<Vec<_>, _>>()?;
    let (coarse, fine) = (&tests[tests.len() - 2], &tests[tests.len() - 1]);
    let mut rep = Report::default();
    for t in &tests {
        let last = t.resolution == n;
        let ok = t.interior_error <= tol;
        rep.rows.push(Row::new("cg-selftest", "interior", t.resolution, t.resolution as f64, t.interior_error, ZERO, if last { status(ok) } else { "sample" }));
        for (i, &(z, e)) in t.exterior_errors.iter().enumerate() {
            rep.rows.push(Row::new("cg-selftest", "exterior", i, z.norm(), e, z, if last { status(e <= tol) } else { "sample" }));
            if last {
                rep.check(e <= tol, format!("exterior error {e:e} at |ζ| = {} exceeds {tol:e}", z.norm()));
            }
        }
        for (k, &(name, e)) in t.dbar_inverse_errors.iter().enumerate() {
            let ok = e <= 5e-2 && (!last || e < coarse.dbar_inverse_errors[k].1);
            rep.rows.push(Row::new("cg-selftest", &format!("dbar-inverse {name}"), t.resolution, t.resolution as f64, e, ZERO, if last { status(ok) } else { "sample" }));
            if last {
                rep.check(ok, format!("∂̄T{name} error {e:e} is above 5e-2 or did not shrink"));
            }
        }
        rep.rows.push(Row::new("cg-selftest", "bound", t.resolution, t.resolution as f64, t.bound, ZERO, "sample"));
        if last {
            rep.check(ok, format!("interior error {:e} exceeds {tol:e}", t.interior_error));
        }
    }
    let ratio = coarse.interior_error / fine.interior_error;
    rep.rows.push(Row::new("cg-selftest", "refinement", n, ratio, 1.7, ZERO, status(ratio >= 1.7)));
    rep.check(ratio >= 1.7, format!("interior error shrinks only by {ratio:.3} under refinement"));
    rep.summary.push(format!("T1 = conj(ζ): max error {:.3e} at N = {n}, refinement factor {ratio:.2}", fine.interior_error));

    let mut plot = Plot::new("cg-selftest", "Cauchy-Green transform errors", "N", "error").log_log();
    plot = plot.with(Series::line("T1 - conj(ζ)", tests.iter().map(|t| (t.resolution as f64, t.interior_error)).collect()));
    for (k, &(name, _)) in fine.dbar_inverse_errors.iter().enumerate() {
        plot = plot.with(Series::line(&format!("dbar T {name}"), tests.iter().map(|t| (t.resolution as f64, t.dbar_inverse_errors[k].1)).collect()));
    }
    rep.plots.push(plot);
    Ok(rep)
}

pub fn solve_disc_cmd(cfg: &Config) -> Result<Report, CliError> {
    let n = cfg.dim;
    let a = cfg.structure()?;
    let grid = make_grid(1.0, cfg.resolution.unwrap_or(64))?;
    let p = cfg.point_or(CVec::zeros(n))?;
    let v = cfg.direction_or(unit(n, 0, c(1.0, 0.0)))?;
    let tol = cfg.tol.unwrap_or(1e-6);
    let max_iter = cfg.samples.unwrap_or(50);
    let w = DiscMap::affine(&grid, &p, &v, cfg.radius.unwrap_or(0.5))?;
    let z = solve_disc(&w, &a, tol, max_iter)?;
    let mut rep = Report::default();
    for (i, &inc) in z.increments.iter().enumerate() {
        rep.rows.push(Row::new("picard", "increment", i + 1, (i + 1) as f64, inc, ZERO, "sample"));
    }
    let ok = z.residual() <= tol;
    rep.rows.push(Row::new("solve-disc", "residual", z.iterations, z.residual(), tol, ZERO, status(ok)));
    rep.check(ok, format!("residual {:e} above {tol:e}", z.residual()));
    for (k, &x) in z.center().iter().enumerate() {
        rep.rows.push(Row::new("solve-disc", "center", k, 0.0, 0.0, x, "sample"));
    }
    let tangent = z.tangent_at_center();
    for (k, &x) in tangent.iter().enumerate() {
        rep.rows.push(Row::new("solve-disc", "tangent", k, 0.0, 0.0, x, "sample"));
    }
    let angle = real_angle(&tangent, &v);
    rep.rows.push(Row::new("solve-disc", "tangent-angle", 0, angle, 0.0, ZERO, "sample"));
    rep.rows.push(Row::new("solve-disc", "seed-distance", 0, z.sup_distance(&w)?, 0.0, ZERO, "sample"));
    rep.summary.push(format!("residual {:.3e} after {} iterations; tangent at 0 is {angle:.2e} rad from the seed direction", z.residual(), z.iterations));

    let inc: Vec<(f64, f64)> = z.increments.iter().enumerate().map(|(i, &d)| ((i + 1) as f64, d)).collect();
    let mut plot = Plot::new("solve-disc-increments", "Picard increments", "iteration", "sup increment");
    plot.log_y = true;
    rep.plots.push(plot.with(Series::line("increment", inc)));
    let image: Vec<(f64, f64)> = (0..grid.len()).map(|k| z.point(k)[0]).map(|w| (w.re, w.im)).collect();
    let seed: Vec<(f64, f64)> = (0..grid.len()).map(|k| w.point(k)[0]).map(|w| (w.re, w.im)).collect();
    rep.plots.push(
        Plot::new("solve-disc-image", "first component of the disc", "x1", "y1").with(Series::dots("seed", seed)).with(Series::dots("solution", image)),
    );
    Ok(rep)
}

fn boundary_point(cfg: &Config, d: &DefiningDomain) -> Result<CVec, CliError> {
    let default = match cfg.rho {
        DomainSpec::Ball(r) => unit(cfg.dim, cfg.dim - 1, c(0.0, r)),
        _ => CVec::zeros(cfg.dim),
    };
    let p = cfg.point_or(default)?;
    let r = d.rho(&p);
    if r.abs() > almost_fatou::geometry::BOUNDARY_TOL {
        return Err(almost_fatou::Error::NotOnBoundary(r).into());
    }
    Ok(p)
}

fn grid_params(cfg: &Config, alphas: &[f64], epss: &[f64]) -> Vec<(f64, f64)> {
    let alphas = cfg.alpha.clone().unwrap_or_else(|| alphas.to_vec());
    let epss = cfg.eps.clone().unwrap_or_else(|| epss.to_vec());
    alphas.iter().flat_map(|&a| epss.iter().map(move |&e| (a, e))).collect()
}

pub fn regions(cfg: &Config) -> Result<Report, CliError> {
    let d = cfg.domain()?;
    let p = boundary_point(cfg, &d)?;
    let h = holomorphic_tangent(&d, &p)?;
    let mut params = grid_params(cfg, &[1.0], &[0.5]);
    params.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let count = cfg.samples.unwrap_or(10_000);
    let scale = cfg.radius.unwrap_or(0.3);
    let mut rng = stream_rng(cfg.seed, 0);
    let mut rep = Report::default();
    let mut violations = 0usize;
    let mut admitted = vec![Vec::new(); params.len()];
    let mut rejected = Vec::new();
    let mut tested = 0;
    let mut tries = 0usize;
    while tested < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(almost_fatou::Error::Precondition("could not place sample points inside the domain".into()).into());
        }
        let q = &p + CVec::from_fn(cfg.dim, |_, _| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)));
        if !d.contains(&q) {
            continue;
        }
        let r = cnorm(&(&q - &p));
        let delta = delta_p(&d, &p, &q)?;
        let dp = d_p(&d, &p, &q)?;
        let mut inside = Vec::with_capacity(params.len());
        for &(alpha, eps) in &params {
            inside.push(in_admissible_with(&d, &p, &h, alpha, eps, &q)?);
        }
        let cone = in_cone(&d, &p, 2.0, &q)?;
        // A_{α,ε} grows with α and, where δ < 1, shrinks with ε.
        let mut ok = delta <= r * (1.0 + 1e-12) && dp <= r * (1.0 + 1e-12);
        for i in 0..params.len() {
            for j in 0..params.len() {
                let (ai, ei) = params[i];
                let (aj, ej) = params[j];
                if inside[i] && aj >= ai && ej <= ei && delta < 1.0 && !inside[j] {
                    ok = false;
                }
            }
        }
        if !ok {
            violations += 1;
        }
        let label = params.iter().zip(&inside).filter(|(_, &x)| x).map(|((a, e), _)| format!("A({a},{e})")).collect::<Vec<_>>().join(" ");
        let membership = match (cone, label.is_empty()) {
            (true, true) => "cone".to_string(),
            (true, false) => format!("cone {label}"),
            (false, true) => "outside".to_string(),
            (false, false) => label,
        };
        rep.rows.push(Row::new("regions", &membership, tested, r, delta, c(dp, d.rho(&q)), if ok { "ok" } else { "violation" }));
        match inside.iter().position(|&x| x) {
            Some(i) => admitted[i].push((r, delta)),
            None => rejected.push((r, delta)),
        }
        tested += 1;
    }
    for (i, &(alpha, eps)) in params.iter().enumerate() {
        let n_in = rep.rows.iter().filter(|row| row.label.contains(&format!("A({alpha},{eps})"))).count();
        rep.rows.push(Row::new("regions", &format!("alpha={alpha} eps={eps}"), i, alpha, eps, c(n_in as f64, count as f64), "sample"));
    }
    rep.rows.push(Row::new("regions", "invariants", violations, count as f64, 0.0, ZERO, status(violations == 0)));
    rep.check(violations == 0, format!("{violations} of {count} points break the distance or nesting invariants"));
    rep.summary.push(format!("{count} points classified, {violations} invariant violations"));

    let mut plot = Plot::new("regions", "approach regions", "|q - p|", "delta_p(q)").log_log().with(Series::dots("outside", rejected));
    for (pts, (alpha, eps)) in admitted.into_iter().zip(&params) {
        plot = plot.with(Series::dots(&format!("first admitted by alpha={alpha} eps={eps}"), pts));
    }
    rep.plots.push(plot);
    Ok(rep)
}

fn lab_options(cfg: &Config, disc_resolution: usize) -> LabOptions {
    let mut opts = LabOptions { seed: cfg.seed, lp: cfg.p, ..LabOptions::default() };
    opts.disc = DiscOptions { resolution: cfg.resolution.unwrap_or(disc_resolution), ..opts.disc };
    opts
}

fn analytic_value(cfg: &Config, p: &CVec) -> Option<Complex64> {
    match cfg.function.clone().unwrap_or(FunctionSpec::PerturbedExp(0.1)) {
        FunctionSpec::PerturbedExp(_) | FunctionSpec::Exp => Some(p[p.len() - 1].exp()),
        FunctionSpec::Oscillator => None,
    }
}

/// `γ(t) = p - i s (1 - t) e_n`.
fn normal_curve(p: &CVec, depth: f64) -> Curve {
    let (p, n) = (p.clone(), p.len());
    Arc::new(move |t| {
        let mut z = p.clone();
        z[n - 1] -= c(0.0, depth * (1.0 - t));
        z
    })
}

fn limit_plot(name: &str, title: &str, series: Vec<(String, &LimitEstimate)>) -> Plot {
    let mut plot = Plot::new(name, title, "scale 2^-k", "Cauchy-tail width").log_log();
    for (label, e) in series {
        plot = plot.with(Series::line(&label, e.scales.iter().map(|s| (0.5f64.powi(s.k as i32), s.width)).collect()));
    }
    plot
}

pub fn lindelof(cfg: &Config) -> Result<Report, CliError> {
    let d = cfg.domain()?;
    let p = boundary_point(cfg, &d)?;
    let f = cfg.test_function(&d, FunctionSpec::PerturbedExp(0.1));
    let tol = cfg.tol.unwrap_or(2e-2);
    let params = grid_params(cfg, &[0.5, 1.0, 2.0], &[0.25, 0.5]);
    let opts = lab_options(cfg, 32);
    let gamma = normal_curve(&p, cfg.radius.unwrap_or(0.5));
    let r = chirka_lindelof_experiment(&f, &d, &p, &gamma, &params, tol, &opts)?;
    let analytic = analytic_value(cfg, &p);
    let mut rep = Report { rows: lindelof_rows(&r, analytic, tol), ..Report::default() };
    rep.check(r.agree, "curve and region limits disagree".into());
    if let Some(l) = analytic {
        for reg in &r.regions {
            let ok = reg.estimate.value.is_some_and(|v| (v - l).norm() <= tol);
            rep.check(ok, format!("region alpha={} eps={} misses the boundary value {l}", reg.alpha, reg.eps));
        }
    }
    let exponent = r.oscillation_exponent.unwrap_or(f64::NAN);
    rep.check(exponent >= 0.05, format!("filling-disc oscillation exponent {exponent:.3} below 0.05"));
    rep.summary.push(format!(
        "profile tau {:.3} ({}); curve limit {}; oscillation exponent {exponent:.3} (predicted at least {:.3})",
        r.profile.tau,
        if r.hypotheses_hold { "hypotheses hold" } else { "hypotheses violated" },
        r.curve.last(),
        r.predicted_exponent
    ));

    let mut series = vec![("curve".to_string(), &r.curve)];
    series.extend(r.regions.iter().map(|reg| (format!("alpha={} eps={}", reg.alpha, reg.eps), &reg.estimate)));
    rep.plots.push(limit_plot("lindelof-limits", "limits along the curve and through regions", series));
    rep.plots.push(
        Plot::new("lindelof-ladder", "oscillation on filling discs", "depth s", "oscillation")
            .log_log()
            .with(Series::line("measured", r.ladder.iter().map(|l| (l.depth, l.oscillation)).collect())),
    );
    rep.plots.push(profile_plot(&r.profile));
    Ok(rep)
}

fn profile_plot(p: &SubsolutionProfile) -> Plot {
    let mut plot = Plot::new("profile", "subsolution profile", "dist to boundary", "norm of dbar_J F").log_log();
    plot = plot.with(Series::dots("samples", p.table.clone()));
    if p.tau.is_finite() {
        let (lo, hi) = p.table.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &(s, _)| (a.min(s), b.max(s)));
        let bound = |s: f64| p.c * s.powf(p.tau - 0.5);
        plot = plot.with(Series::line("fitted envelope", vec![(lo, bound(lo)), (hi, bound(hi))]));
    }
    plot
}

pub fn tangent(cfg: &Config) -> Result<Report, CliError> {
    let d = cfg.domain()?;
    let p = boundary_point(cfg, &d)?;
    let n = cfg.dim;
    let f = cfg.test_function(&d, FunctionSpec::PerturbedExp(0.1));
    let tol = cfg.tol.unwrap_or(1e-2);
    let depth = cfg.radius.unwrap_or(1.0);
    let g1 = normal_curve(&p, depth);
    let g2: Curve = {
        let g1 = g1.clone();
        Arc::new(move |t| {
            let mut z = g1(t);
            z[n - 1] += c((1.0 - t).powi(2), 0.0);
            z
        })
    };
    let count = cfg.samples.unwrap_or(10);
    let ts: Vec<f64> = (1..=count as i32).map(|k| 1.0 - 0.5f64.powi(k)).collect();
    let r = tangent_curves_experiment(&f, &d, &g1, &g2, &ts, tol, &lab_options(cfg, 32))?;
    let last_ratio = r.rows.last().map_or(f64::NAN, |t| t.ratio);
    let mut rep = Report { rows: tangent_rows(&r), ..Report::default() };
    rep.check(r.monotone, "curve differences are not monotone".into());
    rep.check(r.settled, format!("curve difference does not fall below {tol:e}"));
    rep.check(last_ratio <= 0.1, format!("|ζ_2|/(1 - t) ends at {last_ratio:e}, above 0.1"));
    rep.summary.push(format!(
        "last difference {:.3e}, decay rate {:.3}, last |ζ_2|/(1-t) = {last_ratio:.3e}",
        r.rows.last().map_or(f64::NAN, |t| t.curve_difference),
        r.decay_rate.unwrap_or(f64::NAN)
    ));
    rep.plots.push(
        Plot::new("tangent", "tangent curves", "1 - t", "value")
            .log_log()
            .with(Series::line("|F(g1) - F(g2)|", r.rows.iter().map(|t| (1.0 - t.t, t.curve_difference)).collect()))
            .with(Series::line("|F(z(0)) - F(z(zeta2))|", r.rows.iter().map(|t| (1.0 - t.t, t.disc_difference)).collect()))
            .with(Series::line("|zeta2| / (1 - t)", r.rows.iter().map(|t| (1.0 - t.t, t.ratio)).collect())),
    );
    Ok(rep)
}

fn survey_patch(cfg: &Config) -> Result<SubmanifoldPatch, CliError> {
    let n = cfg.dim;
    let patch = match cfg.rho {
        DomainSpec::Ball(r) => {
            let torus = SubmanifoldPatch::clifford_torus(n, vec![0.0; n], vec![1.0; n])?;
            SubmanifoldPatch::new(vec![0.0; n], vec![1.0; n], move |u| torus.point(u) * c(r, 0.0))?
        }
        DomainSpec::Halfspace => SubmanifoldPatch::new(vec![-0.5; n], vec![0.5; n], |u| CVec::from_iterator(u.len(), u.iter().map(|&x| c(x, 0.0))))?,
        DomainSpec::Polynomial(_) => {
            return Err(ConfigError::Value { key: "rho".into(), msg: "the survey needs a halfspace or a ball".into() }.into());
        }
    };
    Ok(patch)
}

pub fn fatou_survey_cmd(cfg: &Config) -> Result<Report, CliError> {
    let d = cfg.domain()?;
    let e = survey_patch(cfg)?;
    let f = cfg.test_function(&d, FunctionSpec::PerturbedExp(0.6));
    let tol = cfg.tol.unwrap_or(1e-2);
    let (alpha, eps) = grid_params(cfg, &[1.0], &[0.5])[0];
    let count = cfg.samples.unwrap_or(64);
    let r = fatou_survey(&f, &d, &e, count, alpha, eps, tol, &lab_options(cfg, 32))?;
    let mut rep = Report { rows: survey_rows(&r), ..Report::default() };
    rep.plots.push(profile_plot(&r.profile));
    if !r.accepted {
        rep.findings.push(format!("F is rejected at profiling: tau = {:.3} ({})", r.profile.tau, r.profile.verdict.as_str()));
        rep.summary.push(format!("profile tau {:.3}: not a subsolution, no points sampled", r.profile.tau));
        return Ok(rep);
    }
    rep.check(r.fraction >= 0.95, format!("only {:.1}% of points converge", 100.0 * r.fraction));
    rep.summary.push(format!("profile tau {:.3}; {:.1}% of {count} points converge at tol {tol:e}", r.profile.tau, 100.0 * r.fraction));
    let (good, bad): (Vec<_>, Vec<_>) = r.points.iter().partition(|p| p.estimate.as_ref().is_ok_and(|e| e.is_convergent()));
    let xy = |v: Vec<&SurveyPoint>| v.iter().map(|p| (p.parameters[0], p.parameters.get(1).copied().unwrap_or(0.0))).collect();
    rep.plots.push(
        Plot::new("fatou-survey", "sampled boundary points", "u1", "u2").with(Series::dots("convergent", xy(good))).with(Series::dots("not convergent", xy(bad))),
    );
    Ok(rep)
}
