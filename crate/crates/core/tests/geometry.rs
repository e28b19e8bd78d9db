use std::sync::Arc;

use almost_fatou::almost_complex::{pushforward_a, AffineChange, ChartBox, ComplexMatrixField, CoordinateChange};
use almost_fatou::geometry::*;
use almost_fatou::linalg::{cnorm, cvec, from_real, real_linear, to_real, CMat, CVec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CVec {
    CVec::from_fn(n, |_, _| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
}

/// Random unitary from the QR factorization of a random complex matrix.
fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let m = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m.qr().q()
}

#[test]
fn membership_families_of_the_model() {
    let d = DefiningDomain::halfspace(2);
    let p = CVec::zeros(2);
    for (alpha, eps) in [(0.5, 0.25), (1.0, 0.5), (2.0, 0.5)] {
        let s0 = normal_depth_bound(alpha, eps).min(1.0);
        for k in 1..=12 {
            let s = s0 * 0.5f64.powi(k);
            let normal = cvec(&[c(0.0, 0.0), c(0.0, -s)]);
            assert!(in_admissible(&d, &p, alpha, eps, &normal).unwrap(), "normal point s={s}");
            let x = s.powf((1.0 + eps) / 2.0) * (alpha / 2.0f64).sqrt();
            // |x|² + s² < α s^{1+ε} once s^{1-ε} < α/2
            if s.powf(1.0 - eps) < alpha / 2.0 {
                let tangential = cvec(&[c(x, 0.0), c(0.0, -s)]);
                assert!(in_admissible(&d, &p, alpha, eps, &tangential).unwrap(), "tangential point s={s}");
            }
        }
    }
    for k in 4..=14 {
        let s = 0.5f64.powi(k);
        let far = cvec(&[c(s.sqrt(), 0.0), c(0.0, -s)]);
        assert!(!in_admissible(&d, &p, 1.0, 0.5, &far).unwrap(), "parabolic point s={s}");
    }
}

#[test]
fn sphere_tangent_space_matches_the_projector() {
    let d = DefiningDomain::ball(CVec::zeros(3), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let raw = random_point(&mut rng, 3, 1.0);
        let p = &raw / c(cnorm(&raw), 0.0);
        let q = &p * c(0.7, 0.0) + random_point(&mut rng, 3, 0.2);
        if !d.contains(&q) {
            continue;
        }
        // the complement of H_p is the complex line through the normal p
        let v = &q - &p;
        let oracle = p.dotc(&v).norm();
        assert!((d_p(&d, &p, &q).unwrap() - oracle).abs() < 1e-10);
    }
}

#[test]
fn distances_never_exceed_the_distance_to_p() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ball = DefiningDomain::ball(CVec::zeros(2), 1.0);
    let p = cvec(&[c(0.6, 0.0), c(0.0, -0.8)]);
    let flat = DefiningDomain::halfspace(2);
    let mut checked = 0;
    while checked < 2000 {
        let (d, base) = if checked % 2 == 0 { (&ball, p.clone()) } else { (&flat, CVec::zeros(2)) };
        let q = &base + random_point(&mut rng, 2, 0.5);
        if !d.contains(&q) {
            continue;
        }
        let r = cnorm(&(&q - &base));
        assert!(delta_p(d, &base, &q).unwrap() <= r * (1.0 + 1e-12));
        assert!(d_p(d, &base, &q).unwrap() <= r * (1.0 + 1e-12));
        checked += 1;
    }
}

#[test]
fn regions_nest_on_random_points() {
    let d = DefiningDomain::halfspace(2);
    let p = CVec::zeros(2);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut tested = 0;
    let mut admitted = 0;
    while tested < 10_000 {
        let q = random_point(&mut rng, 2, 0.3);
        if !d.contains(&q) || delta_p(&d, &p, &q).unwrap() >= 1.0 {
            continue;
        }
        tested += 1;
        let a1 = rng.gen_range(1.01..3.0);
        let a2 = a1 + rng.gen_range(0.0..2.0);
        if in_cone(&d, &p, a1, &q).unwrap() {
            assert!(in_cone(&d, &p, a2, &q).unwrap());
        }
        let (b1, b2) = (a1 - 1.0, a2 - 1.0 + 1e-3);
        let e1 = rng.gen_range(0.05..1.0);
        let e2 = e1 * rng.gen_range(0.0..1.0);
        if in_admissible(&d, &p, b1, e1, &q).unwrap() {
            admitted += 1;
            assert!(in_admissible(&d, &p, b2, e2.max(1e-6), &q).unwrap());
        }
    }
    assert!(admitted > 100, "only {admitted} admitted points");
}

#[test]
fn unitary_changes_preserve_regions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = ComplexMatrixField::constant(DMatrix::from_fn(2, 2, |r, k| c(0.05 * (r + 1) as f64, -0.03 * k as f64)));
    let d = DefiningDomain::ball(CVec::zeros(2), 1.0).with_structure(a.clone()).unwrap();
    let p = cvec(&[c(0.0, 0.6), c(0.8, 0.0)]);
    let u = random_unitary(&mut rng, 2);
    // w = p + U(z - p) fixes p
    let change = AffineChange::new(u.clone(), CMat::zeros(2, 2), &p - &u * &p).unwrap();
    let inv = {
        let (u, p) = (u.clone(), p.clone());
        move |w: &CVec| &p + u.adjoint() * (w - &p)
    };
    let r = real_linear(&u);
    let moved = {
        let (ball, inv) = (d.clone(), inv.clone());
        let ball2 = d.clone();
        let inv2 = inv.clone();
        DefiningDomain::from_fn(2, "moved ball", move |w| ball.rho(&inv(w)), Some(Arc::new(move |w: &CVec| &r * ball2.gradient(&inv2(w)))))
    };
    let moved = moved.with_structure(pushforward_a(&a, Arc::new(change.clone()), ChartBox::unbounded(2)).unwrap()).unwrap();
    let mut agree = 0;
    for _ in 0..2000 {
        let q = &p * c(0.9, 0.0) + random_point(&mut rng, 2, 0.2);
        if !d.contains(&q) {
            continue;
        }
        let w = change.apply(&q);
        let dist = |x: &DefiningDomain, pt: &CVec| delta_p(x, &p, pt).unwrap();
        assert!((dist(&d, &q) - dist(&moved, &w)).abs() < 1e-10);
        assert!((d_p(&d, &p, &q).unwrap() - d_p(&moved, &p, &w).unwrap()).abs() < 1e-10);
        for (alpha, eps) in [(0.5, 0.25), (2.0, 0.5)] {
            assert_eq!(in_admissible(&d, &p, alpha, eps, &q).unwrap(), in_admissible(&moved, &p, alpha, eps, &w).unwrap());
        }
        assert_eq!(in_cone(&d, &p, 1.5, &q).unwrap(), in_cone(&moved, &p, 1.5, &w).unwrap());
        agree += 1;
    }
    assert!(agree > 500);
}

#[test]
fn normalized_sphere_distance_is_comparable_to_rho() {
    let d = DefiningDomain::ball(CVec::zeros(2), 1.0);
    let p = cvec(&[c(0.6, 0.0), c(0.0, 0.8)]);
    let nd = normalize_domain(&d, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r0 = 0.1;
    let origin = CVec::zeros(2);
    let mut seen = 0;
    while seen < 500 {
        let z = random_point(&mut rng, 2, r0);
        if cnorm(&z) > r0 || !nd.domain.contains(&z) {
            continue;
        }
        let ratio = delta_p(&nd.domain, &origin, &z).unwrap() / nd.domain.rho(&z).abs();
        assert!((0.5..=2.0).contains(&ratio), "{ratio} at {z:?}");
        seen += 1;
    }
}

#[test]
fn ball_depths_follow_the_sphere() {
    let d = DefiningDomain::ball(CVec::zeros(2), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let raw = random_point(&mut rng, 2, 1.0);
        let p = &raw / c(cnorm(&raw), 0.0);
        for s in [0.2, 0.05, 0.01] {
            let q = &p * c(1.0 - s, 0.0);
            let delta = delta_p(&d, &p, &q).unwrap();
            assert!((delta / s - 1.0).abs() < 2.0 * s, "{delta} at depth {s}");
        }
    }
}

#[test]
fn perturbed_real_slice_stays_generic() {
    let d = DefiningDomain::halfspace(2);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let e: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let patch = SubmanifoldPatch::new(vec![-1.0, -1.0], vec![1.0, 1.0], move |u| {
            cvec(&[c(u[0] + e[0] * u[1], e[1] * u[0] * u[1]), c(u[1], e[2] * u[0] + e[3] * u[1] * u[1])])
        })
        .unwrap();
        assert!(is_generic(&d, &patch).unwrap());
    }
}

#[test]
fn torus_patch_lies_on_the_sphere() {
    let sphere = DefiningDomain::ball(CVec::zeros(2), 1.0);
    let torus = SubmanifoldPatch::clifford_torus(2, vec![0.0, 0.0], vec![std::f64::consts::TAU, std::f64::consts::TAU]).unwrap();
    assert!(torus.boundary_defect(&sphere, &torus.lattice(8)) < 1e-8);
    assert!(is_generic(&sphere, &torus).unwrap());
}

#[test]
fn filling_discs_stay_admissible() {
    let d = DefiningDomain::halfspace(2);
    let p = CVec::zeros(2);
    let v = cvec(&[c(0.6, 0.0), c(0.0, 0.0)]) + cvec(&[c(0.0, 0.8), c(0.0, 0.0)]);
    let disc = filling_discs(&d, &p, c(0.0, -1e-3), &v, 1.0, 0.5, 16).unwrap();
    for k in 0..disc.seed.grid().len() {
        assert!(in_admissible(&d, &p, 1.0, 0.5, &disc.seed.point(k)).unwrap());
    }
    // a base point off the normal aperture is refused
    assert!(filling_discs(&d, &p, c(0.1, -1e-3), &v, 1.0, 0.5, 16).is_err());
}

#[test]
fn inward_segment_is_admissible() {
    let d = DefiningDomain::ball(CVec::zeros(2), 1.0);
    let p = cvec(&[c(0.0, 0.0), c(0.0, -1.0)]);
    let q = p.clone();
    let straight: almost_fatou::disc::Curve = Arc::new(move |t| &q * c(0.5 + 0.5 * t, 0.0));
    let check = is_admissible_curve(&d, &straight);
    assert!(check.admissible, "{:?}", check.reasons);
    assert!((check.transversality - 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn real_roundtrip_of_points(x in prop::collection::vec(-5.0..5.0f64, 6)) {
        let v = nalgebra::DVector::from_vec(x);
        prop_assert_eq!(to_real(&from_real(&v)), v);
    }

    #[test]
    fn tangent_plane_distance_is_depth_on_the_model(x in -1.0..1.0f64, y in -1.0..1.0f64, s in 1e-6..1.0f64) {
        let d = DefiningDomain::halfspace(2);
        let q = cvec(&[c(x, y), c(0.3 * x, -s)]);
        prop_assert!((delta_p(&d, &CVec::zeros(2), &q).unwrap() - s).abs() < 1e-14);
        prop_assert!((d_p(&d, &CVec::zeros(2), &q).unwrap() - (0.09 * x * x + s * s).sqrt()).abs() < 1e-12);
    }
}
