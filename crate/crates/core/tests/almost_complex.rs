use almost_fatou::almost_complex::*;
use almost_fatou::linalg::{conj_mat, cvec, j_st, real_antilinear, real_linear, spectral_norm, CMat, CVec, RMat};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;

fn matrix(n: usize, entries: &[f64], norm: f64) -> CMat {
    let m = DMatrix::from_fn(n, n, |r, c| Complex64::new(entries[2 * (r * n + c)], entries[2 * (r * n + c) + 1]));
    let s = spectral_norm(&m);
    if s == 0.0 {
        m
    } else {
        m * Complex64::new(norm / s, 0.0)
    }
}

fn row(entries: &[f64]) -> CRow {
    CRow::from_iterator(entries.len() / 2, entries.chunks(2).map(|c| Complex64::new(c[0], c[1])))
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2 * n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn resolvent_identity(e in entries(3), norm in 0.01..0.9f64) {
        let a = matrix(3, &e, norm);
        let id = CMat::identity(3, 3);
        let abar = conj_mat(&a);
        let lhs = (&id - &a * &abar).try_inverse().unwrap() * &a * (&id - &abar * &a);
        prop_assert!((lhs - &a).norm() < 1e-12);
    }

    #[test]
    fn roundtrip_through_the_structure(e in entries(2), norm in 0.0..0.9f64) {
        let a = matrix(2, &e, norm);
        let j = j_from_a(&a).unwrap();
        prop_assert!((&j * &j + RMat::identity(4, 4)).abs().max() < 1e-12);
        prop_assert!((a_from_j_matrix(&j).unwrap() - &a).norm() < 1e-10);
    }

    #[test]
    fn transformation_rule_matches_real_conjugation(
        e in entries(2), m in entries(2), nn in entries(2), norm in 0.0..0.3f64, anti in 0.0..0.5f64,
    ) {
        let a = matrix(2, &e, norm);
        let tz = matrix(2, &m, 1.0) + CMat::identity(2, 2) * Complex64::new(1.5, 0.0);
        let tzb = matrix(2, &nn, anti);
        let t = real_linear(&tz) + real_antilinear(&tzb);
        let pushed = &t * j_from_a(&a).unwrap() * t.clone().try_inverse().unwrap();
        let oracle = a_from_j_matrix(&pushed).unwrap();
        prop_assert!((pushforward_a_matrix(&a, &tz, &tzb).unwrap() - oracle).norm() < 1e-8);
    }

    #[test]
    fn full_and_reduced_operators_vanish_together(e in entries(2), f in prop::collection::vec(-1.0..1.0f64, 8), norm in 0.0..0.9f64) {
        let a = matrix(2, &e, norm);
        let fz = row(&f[..4]);
        let noise = row(&f[4..]);
        // F_z̄ = -F_z A makes the reduced row vanish exactly
        let hol = dbar_j(&fz, &(-(&fz * &a)), &a).unwrap();
        prop_assert!(hol.full.norm() < 1e-12 && hol.reduced.norm() < 1e-12);
        // otherwise full = reduced (I - ĀA)^{-1}, so neither vanishes
        let d = dbar_j(&fz, &noise, &a).unwrap();
        let q = (CMat::identity(2, 2) - conj_mat(&a) * &a).try_inverse().unwrap();
        prop_assert!((&d.full - &d.reduced * q).norm() < 1e-12);
        prop_assert_eq!(d.full.norm() < 1e-9, d.reduced.norm() < 1e-9);
    }

    #[test]
    fn forms_recompose_the_differential(e in entries(2), f in prop::collection::vec(-1.0..1.0f64, 8), norm in 0.0..0.9f64) {
        let a = matrix(2, &e, norm);
        let (fz, fzb) = (row(&f[..4]), row(&f[4..]));
        let basis = form_basis(&a).unwrap();
        prop_assert!(basis.determinant().norm() > 0.0);
        let (dz, dzb) = basis.recompose(&d_j(&fz, &fzb, &a).unwrap(), &dbar_j(&fz, &fzb, &a).unwrap().full);
        prop_assert!((dz - fz).norm() < 1e-12 && (dzb - fzb).norm() < 1e-12);
    }
}

#[test]
fn one_dimensional_form_determinant() {
    for t in [0.0, 0.25, 0.5, 0.9] {
        let b = form_basis(&diag(&[Complex64::new(0.0, t)])).unwrap();
        assert!((b.determinant().re - (1.0 - t * t)).abs() < 1e-15);
    }
}

#[test]
fn affine_change_inverts() {
    let m = DMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.5), Complex64::new(0.2, 0.0), Complex64::new(0.0, -0.3), Complex64::new(0.8, 0.1)]);
    let n = DMatrix::from_row_slice(2, 2, &[Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.2), Complex64::new(-0.2, 0.1), Complex64::new(0.05, 0.0)]);
    let t = AffineChange::new(m, n, cvec(&[Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.0)])).unwrap();
    let z = cvec(&[Complex64::new(0.3, -0.7), Complex64::new(2.0, 0.1)]);
    assert!((t.inverse(&t.apply(&z)).unwrap() - z).norm() < 1e-13);
    // z ↦ z + z̄ collapses the imaginary axis
    let flat = AffineChange::new(diag(&[Complex64::new(1.0, 0.0)]), diag(&[Complex64::new(1.0, 0.0)]), CVec::zeros(1));
    assert!(flat.is_err());
}

#[test]
fn pushed_field_follows_the_points() {
    let a = ComplexMatrixField::linear(
        diag(&[Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.05)]),
        vec![
            diag(&[Complex64::new(0.05, 0.0), Complex64::new(0.0, 0.0)]),
            diag(&[Complex64::new(0.0, 0.0), Complex64::new(0.02, 0.01)]),
        ],
    )
    .unwrap();
    let t = AffineChange::new(
        CMat::identity(2, 2) * Complex64::new(2.0, 0.0),
        diag(&[Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.0)]),
        cvec(&[Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]),
    )
    .unwrap();
    let pushed = pushforward_a(&a, Arc::new(t.clone()), ChartBox::unbounded(2)).unwrap();
    let z = cvec(&[Complex64::new(0.2, 0.1), Complex64::new(-0.3, 0.4)]);
    let direct = pushforward_a_matrix(&a.eval(&z).unwrap(), &t.m, &t.n).unwrap();
    assert!((pushed.eval(&t.apply(&z)).unwrap() - direct).norm() < 1e-13);
}

#[test]
fn normalization_moves_the_point_to_the_standard_structure() {
    let base = DMatrix::from_row_slice(2, 2, &[Complex64::new(0.2, 0.1), Complex64::new(0.0, 0.1), Complex64::new(-0.1, 0.0), Complex64::new(0.15, -0.05)]);
    let slope = diag(&[Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.1)]);
    let a = ComplexMatrixField::linear(base, vec![slope.clone(), slope]).unwrap().with_domain(ChartBox::around_origin(2, 3.0));
    let j = StructureField::from_a(&a);
    let p = cvec(&[Complex64::new(0.5, -0.25), Complex64::new(0.0, 0.5)]);
    let chart = normalize_chart(&j, &p, 0.05, 2).unwrap();
    assert!(chart.to_normal(&p).norm() < 1e-12);
    let a0 = chart.field.eval(&CVec::zeros(2)).unwrap();
    assert!(a0.norm() < 1e-10);
    assert!((j_from_a(&a0).unwrap() - j_st(2)).abs().max() < 1e-10);
    assert!(chart.seminorm <= 0.05);
    assert!(chart.lambda < 1.0 && chart.lambda >= LAMBDA_MIN);
    // the pushed field agrees with conjugating J by the real linear part
    let w = cvec(&[Complex64::new(0.3, 0.0), Complex64::new(0.0, -0.2)]);
    let z = chart.from_normal(&w).unwrap();
    let r = chart.change.real_matrix();
    let oracle = a_from_j_matrix(&(&r * j.eval(&z).unwrap() * r.clone().try_inverse().unwrap())).unwrap();
    assert!((chart.field.eval(&w).unwrap() - oracle).norm() < 1e-8);
}

#[test]
fn normalization_reports_a_rough_structure() {
    let a = ComplexMatrixField::new(ChartBox::around_origin(1, 1.0), |z| Ok(diag(&[(z[0] * 40.0).sin() * 0.5])));
    let err = normalize_chart(&StructureField::from_a(&a), &CVec::zeros(1), 1e-6, 1).unwrap_err();
    assert!(matches!(err, almost_fatou::Error::NormalizationFailed { .. }));
}
