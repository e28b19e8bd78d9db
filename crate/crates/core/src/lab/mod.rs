//! Experiments on boundary behaviour of `∂̄_J`-subsolutions.

pub mod experiments;
pub mod functions;
pub mod limits;
pub mod profile;
pub mod schwarz;

pub use experiments::*;
pub use functions::TestFunction;
pub use limits::{admissible_limit, limit_along_curve, LimitEstimate, LimitVerdict, ShellOptions};
pub use profile::{estimate_subsolution_profile, graded_cloud, ProfileVerdict, SubsolutionProfile};
pub use schwarz::{schwarz_battery, schwarz_bound_check, SchwarzBattery, SchwarzReport, SmoothFunction};

use num_complex::Complex64;

/// One line of a flat report table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub section: String,
    pub label: String,
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub re: f64,
    pub im: f64,
    pub status: String,
}

impl Row {
    pub const HEADER: [&'static str; 8] = ["section", "label", "index", "x", "y", "re", "im", "status"];

    pub fn new(section: &str, label: &str, index: usize, x: f64, y: f64, value: Complex64, status: &str) -> Self {
        Row { section: section.into(), label: label.into(), index, x, y, re: value.re, im: value.im, status: status.into() }
    }

    /// Fields in [`Row::HEADER`] order; floats in shortest round-trip form.
    pub fn fields(&self) -> [String; 8] {
        [
            self.section.clone(),
            self.label.clone(),
            self.index.to_string(),
            self.x.to_string(),
            self.y.to_string(),
            self.re.to_string(),
            self.im.to_string(),
            self.status.clone(),
        ]
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Summary row (`x = τ`, `y = C`) followed by the sample table (`x = dist`, `y = ‖∂̄_J F‖`).
pub fn profile_rows(section: &str, label: &str, p: &SubsolutionProfile) -> Vec<Row> {
    let mut rows = vec![Row::new(section, label, 0, p.tau, p.c, Complex64::new(p.tau_stderr, p.fit_residual), p.verdict.as_str())];
    rows.extend(p.table.iter().enumerate().map(|(i, &(s, g))| Row::new(section, label, i + 1, s, g, ZERO, "sample")));
    rows
}

/// One row per scale (`x = 2^{-k}`, `y = width`, value = mean), then the verdict row.
pub fn limit_rows(section: &str, label: &str, e: &LimitEstimate) -> Vec<Row> {
    let mut rows: Vec<Row> =
        e.scales.iter().map(|s| Row::new(section, label, s.k as usize, 0.5f64.powi(s.k as i32), s.width, s.value, "scale")).collect();
    let status = match e.verdict {
        LimitVerdict::Convergent => "convergent",
        LimitVerdict::Divergent => "divergent",
    };
    rows.push(Row::new(section, label, e.scales.len(), e.tol, e.scales.last().map_or(f64::NAN, |s| s.width), e.last(), status));
    rows
}

pub fn lindelof_rows(r: &LindelofReport, analytic: Option<Complex64>, tol: f64) -> Vec<Row> {
    let mut rows = profile_rows("profile", "F", &r.profile);
    rows.push(Row::new("hypotheses", "F", 0, r.profile.tau, 0.0, ZERO, if r.hypotheses_hold { "hold" } else { "violated" }));
    rows.extend(limit_rows("curve", "gamma", &r.curve));
    for (i, reg) in r.regions.iter().enumerate() {
        rows.extend(limit_rows("region", &format!("alpha={} eps={}", reg.alpha, reg.eps), &reg.estimate));
        if let Some(l) = analytic {
            let ok = reg.estimate.value.is_some_and(|v| (v - l).norm() <= tol);
            rows.push(Row::new("region-vs-analytic", &format!("alpha={} eps={}", reg.alpha, reg.eps), i, reg.alpha, reg.eps, reg.estimate.last(), pass(ok)));
        }
    }
    rows.push(Row::new("agreement", "curve-vs-regions", 0, tol, 0.0, r.curve.last(), pass(r.agree)));
    for (i, l) in r.ladder.iter().enumerate() {
        rows.push(Row::new("ladder", "oscillation", i, l.depth, l.oscillation, Complex64::new(l.radius, l.inner_radius), "sample"));
    }
    rows.push(Row::new(
        "ladder",
        "exponent",
        r.ladder.len(),
        r.oscillation_exponent.unwrap_or(f64::NAN),
        r.predicted_exponent,
        ZERO,
        pass(r.oscillation_exponent.is_some_and(|e| e > 0.0)),
    ));
    rows
}

pub fn tangent_rows(r: &TangentReport) -> Vec<Row> {
    let mut rows: Vec<Row> = r
        .rows
        .iter()
        .enumerate()
        .map(|(i, t)| Row::new("tangent", "difference", i, t.t, t.curve_difference, Complex64::new(t.disc_difference, t.ratio), "sample"))
        .collect();
    rows.extend(r.rows.iter().enumerate().map(|(i, t)| Row::new("tangent", "zeta2", i, t.t, t.rho, t.zeta2, "sample")));
    rows.push(Row::new("tangent", "angle", 0, r.tangent_angle, 0.0, ZERO, "sample"));
    rows.push(Row::new("tangent", "monotone", 0, 0.0, 0.0, ZERO, pass(r.monotone)));
    rows.push(Row::new("tangent", "settled", 0, r.rows.last().map_or(f64::NAN, |t| t.curve_difference), 0.0, ZERO, pass(r.settled)));
    rows.push(Row::new(
        "tangent",
        "rates",
        0,
        r.decay_rate.unwrap_or(f64::NAN),
        r.ratio_rate.unwrap_or(f64::NAN),
        ZERO,
        "sample",
    ));
    rows
}

pub fn survey_rows(r: &SurveyReport) -> Vec<Row> {
    let mut rows = profile_rows("profile", "F", &r.profile);
    for p in &r.points {
        let (x, y) = (p.parameters.first().copied().unwrap_or(0.0), p.parameters.get(1).copied().unwrap_or(0.0));
        let row = match &p.estimate {
            Ok(e) => Row::new("survey", "point", p.index, x, y, e.last(), if e.is_convergent() { "convergent" } else { "divergent" }),
            Err(err) => Row::new("survey", "point", p.index, x, y, ZERO, &format!("error: {err}")),
        };
        rows.push(row);
    }
    rows.push(Row::new("survey", "fraction", r.points.len(), r.fraction, 0.0, ZERO, if r.accepted { "accepted" } else { "rejected" }));
    rows
}

pub fn schwarz_rows(b: &SchwarzBattery) -> Vec<Row> {
    let mut rows: Vec<Row> = b
        .rows
        .iter()
        .map(|r| Row::new("schwarz", &format!("f{}", r.function), r.function, r.rho, r.sup, Complex64::new(r.literal_sup, 0.0), "sample"))
        .collect();
    rows.extend(b.variation.iter().zip(&b.literal_variation).enumerate().map(|(i, (&v, &l))| {
        Row::new("schwarz-variation", &format!("f{i}"), i, v, l, ZERO, pass(v <= 2.0))
    }));
    rows.push(Row::new("schwarz", "violations", b.violations, b.constant, 2.0 * b.constant, ZERO, pass(b.violations == 0)));
    rows
}
