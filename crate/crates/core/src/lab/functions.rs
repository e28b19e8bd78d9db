//! Test functions with symbolic Wirtinger gradients.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::almost_complex::{dbar_j, ComplexMatrixField, CRow};
use crate::error::{Error, Result};
use crate::geometry::DefiningDomain;
use crate::linalg::CVec;

type ValueFn = Arc<dyn Fn(&CVec) -> Result<Complex64> + Send + Sync>;
type GradFn = Arc<dyn Fn(&CVec) -> Result<(CRow, CRow)> + Send + Sync>;

/// A function `F` on a chart of ℂⁿ with its gradients `(F_z, F_z̄)`.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    n: usize,
    value: ValueFn,
    grad: GradFn,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("label", &self.label).field("n", &self.n).finish()
    }
}

fn unit_row(n: usize, k: usize, c: Complex64) -> CRow {
    let mut r = CRow::zeros(n);
    r[k] = c;
    r
}

/// `(ρ_z, ρ_z̄)` from the real gradient.
fn rho_wirtinger(d: &DefiningDomain, z: &CVec) -> (CRow, CRow) {
    let g = d.gradient(z);
    let n = d.dim();
    let rz = CRow::from_fn(n, |_, k| Complex64::new(0.5 * g[2 * k], -0.5 * g[2 * k + 1]));
    let rzb = rz.map(|c| c.conj());
    (rz, rzb)
}

/// `-ρ(z)`, rejecting points outside the domain.
fn depth(d: &DefiningDomain, z: &CVec) -> Result<f64> {
    let r = d.rho(z);
    if !(r < 0.0) {
        return Err(Error::OutsideDomain(r));
    }
    Ok(-r)
}

impl TestFunction {
    pub fn new(
        label: &str,
        n: usize,
        value: impl Fn(&CVec) -> Result<Complex64> + Send + Sync + 'static,
        grad: impl Fn(&CVec) -> Result<(CRow, CRow)> + Send + Sync + 'static,
    ) -> Self {
        TestFunction { label: label.to_string(), n, value: Arc::new(value), grad: Arc::new(grad) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn value(&self, z: &CVec) -> Result<Complex64> {
        (self.value)(z)
    }

    pub fn gradients(&self, z: &CVec) -> Result<(CRow, CRow)> {
        (self.grad)(z)
    }

    /// `‖∂̄_J F(z)‖` for the structure with complex matrix `a`.
    pub fn dbar_norm(&self, a: &ComplexMatrixField, z: &CVec) -> Result<f64> {
        let (fz, fzb) = self.gradients(z)?;
        Ok(dbar_j(&fz, &fzb, &a.eval(z)?)?.norm())
    }

    pub fn plus(&self, other: &TestFunction) -> Result<TestFunction> {
        if other.n != self.n {
            return Err(Error::InvalidParameter("summands live in different dimensions".into()));
        }
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        Ok(TestFunction::new(
            &format!("{} + {}", self.label, other.label),
            self.n,
            move |z| Ok(a.value(z)? + b.value(z)?),
            move |z| {
                let (p, q) = ga.gradients(z)?;
                let (r, s) = gb.gradients(z)?;
                Ok((p + r, q + s))
            },
        ))
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        TestFunction::new("constant", n, move |_| Ok(c), move |_| Ok((CRow::zeros(n), CRow::zeros(n))))
    }

    /// `exp(z_n)`.
    pub fn exp_last(n: usize) -> Self {
        TestFunction::new("exp(z_n)", n, move |z| Ok(z[n - 1].exp()), move |z| Ok((unit_row(n, n - 1, z[n - 1].exp()), CRow::zeros(n))))
    }

    /// `z_1²`.
    pub fn square_first(n: usize) -> Self {
        TestFunction::new("z_1^2", n, |z| Ok(z[0] * z[0]), move |z| Ok((unit_row(n, 0, z[0] * 2.0), CRow::zeros(n))))
    }

    /// `z̄_1 (-ρ)^β`.
    pub fn conj_depth(d: &DefiningDomain, beta: f64) -> Self {
        let n = d.dim();
        let (dv, dg) = (d.clone(), d.clone());
        TestFunction::new(
            &format!("conj(z_1)(-rho)^{beta}"),
            n,
            move |z| Ok(z[0].conj() * depth(&dv, z)?.powf(beta)),
            move |z| {
                let s = depth(&dg, z)?;
                let (rz, rzb) = rho_wirtinger(&dg, z);
                // ∂(-ρ)^β = -β (-ρ)^{β-1} ∂ρ
                let k = z[0].conj() * (-beta * s.powf(beta - 1.0));
                let fz = rz * k;
                let fzb = rzb * k + unit_row(n, 0, Complex64::new(s.powf(beta), 0.0));
                Ok((fz, fzb))
            },
        )
    }

    /// `exp(z_n) + z̄_1 (-ρ)^β`, a bounded function tending to `exp(z_n)` at `bΩ`.
    pub fn perturbed_exp(d: &DefiningDomain, beta: f64) -> Self {
        TestFunction::exp_last(d.dim()).plus(&TestFunction::conj_depth(d, beta)).expect("same dimension")
    }

    /// `(-ρ)^β`, with `‖∂̄F‖` of order `dist^{β-1}`.
    pub fn depth_power(d: &DefiningDomain, beta: f64) -> Self {
        let (dv, dg) = (d.clone(), d.clone());
        TestFunction::new(
            &format!("(-rho)^{beta}"),
            d.dim(),
            move |z| Ok(Complex64::new(depth(&dv, z)?.powf(beta), 0.0)),
            move |z| {
                let s = depth(&dg, z)?;
                let (rz, rzb) = rho_wirtinger(&dg, z);
                let k = Complex64::new(-beta * s.powf(beta - 1.0), 0.0);
                Ok((rz * k, rzb * k))
            },
        )
    }

    /// `sin(log(-ρ))`: bounded, oscillating without limit towards `bΩ`.
    pub fn log_oscillator(d: &DefiningDomain) -> Self {
        let (dv, dg) = (d.clone(), d.clone());
        TestFunction::new(
            "sin(log(-rho))",
            d.dim(),
            move |z| Ok(Complex64::new(depth(&dv, z)?.ln().sin(), 0.0)),
            move |z| {
                let s = depth(&dg, z)?;
                let (rz, rzb) = rho_wirtinger(&dg, z);
                // d sin(log(-ρ)) = cos(log(-ρ)) dρ / ρ
                let k = Complex64::new(-s.ln().cos() / s, 0.0);
                Ok((rz * k, rzb * k))
            },
        )
    }

    /// `z̄_1 / |z_1|`, undefined on `{z_1 = 0}`.
    pub fn phase(n: usize) -> Self {
        let check = |z: &CVec| {
            if z[0].norm() == 0.0 {
                Err(Error::InvalidParameter("phase is undefined at z_1 = 0".into()))
            } else {
                Ok(z[0].norm())
            }
        };
        TestFunction::new(
            "conj(z_1)/|z_1|",
            n,
            move |z| Ok(z[0].conj() / check(z)?),
            move |z| {
                let r = check(z)?;
                let fz = unit_row(n, 0, -z[0].conj() * z[0].conj() / (2.0 * r * r * r));
                let fzb = unit_row(n, 0, Complex64::new(0.5 / r, 0.0));
                Ok((fz, fzb))
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cvec, from_real, to_real};

    fn numeric_gradients(f: &TestFunction, z: &CVec) -> (CRow, CRow) {
        let h = 1e-6;
        let x = to_real(z);
        let n = z.len();
        let mut fz = CRow::zeros(n);
        let mut fzb = CRow::zeros(n);
        for k in 0..n {
            let diff = |r: usize| {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[r] += h;
                b[r] -= h;
                (f.value(&from_real(&a)).unwrap() - f.value(&from_real(&b)).unwrap()) / (2.0 * h)
            };
            let (dx, dy) = (diff(2 * k), diff(2 * k + 1));
            fz[k] = 0.5 * (dx - Complex64::i() * dy);
            fzb[k] = 0.5 * (dx + Complex64::i() * dy);
        }
        (fz, fzb)
    }

    #[test]
    fn symbolic_gradients_match_differences() {
        let d = DefiningDomain::ball(CVec::zeros(2), 1.0);
        let z = cvec(&[Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.4)]);
        for f in [
            TestFunction::exp_last(2),
            TestFunction::square_first(2),
            TestFunction::conj_depth(&d, 0.1),
            TestFunction::perturbed_exp(&d, 0.6),
            TestFunction::depth_power(&d, 0.4),
            TestFunction::log_oscillator(&d),
            TestFunction::phase(2),
        ] {
            let (fz, fzb) = f.gradients(&z).unwrap();
            let (nz, nzb) = numeric_gradients(&f, &z);
            assert!((fz - nz).norm() < 1e-7 && (fzb - nzb).norm() < 1e-7, "{}", f.label());
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        let d = DefiningDomain::halfspace(1);
        let f = TestFunction::log_oscillator(&d);
        assert!(matches!(f.value(&cvec(&[Complex64::new(0.0, 0.5)])), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn holomorphic_functions_have_vanishing_dbar() {
        let f = TestFunction::square_first(2);
        let z = cvec(&[Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.4)]);
        assert_eq!(f.dbar_norm(&ComplexMatrixField::zero(2), &z).unwrap(), 0.0);
    }
}
