//! Hölder quotients of the one-variable Schwarz-type estimate on `ρ𝔻`:
//!
//! `|g(τ_1) - g(τ_2)| <= C(r) ρ^{-(1-2/p)} (‖g‖_∞ + ρ^{1-2/p} ‖g_ζ̄‖_{L^p(ρ𝔻)}) |τ_1 - τ_2|^{1-2/p}`
//! for `|τ_j| < α = rρ`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{make_grid, norm, wirtinger_dbar, GridFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct SchwarzReport {
    /// Quotient per pair, with the derivative term weighted by `ρ^{1-2/p}`.
    pub quotients: Vec<f64>,
    pub sup: f64,
    /// Sup of the quotients with the derivative term weighted by `ρ` instead.
    pub literal_sup: f64,
    pub sup_norm: f64,
    pub dbar_norm: f64,
}

/// Quotients of `g` over node pairs inside `α𝔻`.
pub fn schwarz_bound_check(g: &GridFunction, p: f64, alpha: f64, pairs: &[(usize, usize)]) -> Result<SchwarzReport> {
    let grid = g.grid();
    let rho = grid.radius();
    if !(p > 2.0) || !(alpha > 0.0 && alpha < rho) {
        return Err(Error::InvalidParameter(format!("need p > 2 and 0 < alpha < rho, got p = {p}, alpha = {alpha}")));
    }
    for &(i, j) in pairs {
        for k in [i, j] {
            if k >= grid.len() || !(grid.node(k).z.norm() < alpha) {
                return Err(Error::Precondition(format!("pair node {k} lies outside the disc of radius {alpha}")));
            }
        }
    }
    let e = 1.0 - 2.0 / p;
    let sup_norm = g.sup();
    let dbar_norm = norm(&wirtinger_dbar(g), p)?;
    let derived = sup_norm + rho.powf(e) * dbar_norm;
    let literal = sup_norm + rho * dbar_norm;
    let mut quotients = Vec::with_capacity(pairs.len());
    let mut sup = 0.0f64;
    let mut literal_sup = 0.0f64;
    for &(i, j) in pairs {
        let dz = grid.node(i).z - grid.node(j).z;
        let df = (g.value(i) - g.value(j)).norm();
        let scale = (dz.norm() / rho).powf(e);
        let q = if df == 0.0 { 0.0 } else { df / (derived * scale) };
        let ql = if df == 0.0 { 0.0 } else { df / (literal * scale) };
        sup = sup.max(q);
        literal_sup = literal_sup.max(ql);
        quotients.push(q);
    }
    Ok(SchwarzReport { quotients, sup, literal_sup, sup_norm, dbar_norm })
}

/// Distinct node pairs drawn uniformly from the nodes inside `α𝔻`.
pub fn random_pairs(g: &GridFunction, alpha: f64, count: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let inside: Vec<usize> = (0..g.grid().len()).filter(|&k| g.grid().node(k).z.norm() < alpha).collect();
    if inside.len() < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let i = inside[rng.gen_range(0..inside.len())];
            let mut j = i;
            while j == i {
                j = inside[rng.gen_range(0..inside.len())];
            }
            (i, j)
        })
        .collect()
}

/// A smooth function on `𝔻`: a polynomial in `ζ, ζ̄` of degree at most 3 plus a Gaussian bump.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFunction {
    coefficients: Vec<((u32, u32), Complex64)>,
    bump: (Complex64, Complex64, f64),
}

impl SmoothFunction {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut coefficients = Vec::new();
        for j in 0..=3u32 {
            for k in 0..=3 - j {
                coefficients.push(((j, k), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            }
        }
        let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let center = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        SmoothFunction { coefficients, bump: (amp, center, rng.gen_range(0.2..0.6)) }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let (amp, center, width) = self.bump;
        let poly: Complex64 = self.coefficients.iter().map(|&((j, k), c)| c * z.powu(j) * z.conj().powu(k)).sum();
        poly + amp * (-(z - center).norm_sqr() / (width * width)).exp()
    }

    /// `τ ↦ f(τ/ρ)` on the grid of radius `ρ`.
    pub fn on_disc(&self, rho: f64, resolution: usize) -> Result<GridFunction> {
        let grid = make_grid(rho, resolution)?;
        Ok(GridFunction::from_fn(&grid, |t| self.eval(t / rho)))
    }
}

/// One battery function at each radius.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryRow {
    pub function: usize,
    pub rho: f64,
    pub sup: f64,
    pub literal_sup: f64,
    /// Quotients per pair, kept for the violation count.
    pub quotients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchwarzBattery {
    pub rows: Vec<BatteryRow>,
    /// `max/min` of the sup quotient across radii, per function.
    pub variation: Vec<f64>,
    pub literal_variation: Vec<f64>,
    /// Largest sup quotient over the calibration functions.
    pub constant: f64,
    /// Pairs exceeding twice the constant, over all functions and radii.
    pub violations: usize,
}

/// Functions `f_i(τ/ρ)` on `ρ𝔻` with `α = rρ`, the pairs fixed by node index
/// so that every radius sees the same rescaled pairs.
#[allow(clippy::too_many_arguments)]
pub fn schwarz_battery(
    functions: &[SmoothFunction],
    calibration: usize,
    rhos: &[f64],
    r: f64,
    p: f64,
    resolution: usize,
    pairs_per_function: usize,
    rng: &mut impl Rng,
) -> Result<SchwarzBattery> {
    if functions.is_empty() || rhos.is_empty() || calibration == 0 || calibration > functions.len() || !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter("battery needs functions, radii, 0 < r < 1 and a calibration subset".into()));
    }
    let mut rows = Vec::new();
    let mut variation = Vec::new();
    let mut literal_variation = Vec::new();
    for (i, f) in functions.iter().enumerate() {
        let template = f.on_disc(rhos[0], resolution)?;
        let mut pairs = random_pairs(&template, r * rhos[0], pairs_per_function, rng);
        // the nearest pairs carry the largest quotients for smooth functions
        let grid = template.grid();
        let c = grid.center_index();
        let neighbour = grid.node_at(grid.node(c).i + 1, grid.node(c).j).expect("center has a neighbour");
        pairs.push((c, neighbour));
        let mut sups = Vec::new();
        let mut literal = Vec::new();
        for &rho in rhos {
            let g = f.on_disc(rho, resolution)?;
            let report = schwarz_bound_check(&g, p, r * rho, &pairs)?;
            sups.push(report.sup);
            literal.push(report.literal_sup);
            rows.push(BatteryRow { function: i, rho, sup: report.sup, literal_sup: report.literal_sup, quotients: report.quotients });
        }
        let ratio = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
        variation.push(ratio(&sups));
        literal_variation.push(ratio(&literal));
    }
    let constant = rows.iter().filter(|row| row.function < calibration).map(|row| row.sup).fold(0.0, f64::max);
    let violations = rows.iter().flat_map(|row| row.quotients.iter()).filter(|&&q| q > 2.0 * constant).count();
    Ok(SchwarzBattery { rows, variation, literal_variation, constant, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_have_zero_quotients() {
        let g = GridFunction::constant(&make_grid(1.0, 32).unwrap(), Complex64::new(2.0, -1.0));
        let pairs = random_pairs(&g, 0.5, 50, &mut ChaCha8Rng::seed_from_u64(1));
        let report = schwarz_bound_check(&g, 4.0, 0.5, &pairs).unwrap();
        assert_eq!(report.sup, 0.0);
    }

    #[test]
    fn conjugate_quotient_by_hand() {
        let grid = make_grid(1.0, 64).unwrap();
        let g = GridFunction::from_fn(&grid, |z| z.conj());
        let pairs = random_pairs(&g, 0.5, 200, &mut ChaCha8Rng::seed_from_u64(2));
        let report = schwarz_bound_check(&g, 4.0, 0.5, &pairs).unwrap();
        // ‖ζ̄‖_∞ = 1 and ‖1‖_{L⁴(𝔻)} = π^{1/4}: Q = |Δτ|^{1/2} / (1 + π^{1/4})
        let total = 1.0 + std::f64::consts::PI.powf(0.25);
        for (&q, &(i, j)) in report.quotients.iter().zip(&pairs) {
            let d = (grid.node(i).z - grid.node(j).z).norm();
            assert!((q - d.sqrt() / total).abs() < 1e-2 * q, "{q}");
        }
    }

    #[test]
    fn pairs_must_lie_in_the_inner_disc() {
        let grid = make_grid(1.0, 32).unwrap();
        let g = GridFunction::from_fn(&grid, |z| z);
        let far = grid.node_at(30, 16).unwrap();
        assert!(matches!(schwarz_bound_check(&g, 4.0, 0.5, &[(grid.center_index(), far)]), Err(Error::Precondition(_))));
    }
}
