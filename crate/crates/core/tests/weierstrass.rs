use std::f64::consts::PI;

use dihedral_core::periods::{
    circle_integral, contour_circle, dccw_data, de_data, de_limit_root, dks_data, DccwParams, DeParams, DksParams,
};
use dihedral_core::weierstrass::{
    classify_end, classify_orders, growth_rate, integrate_map, lopez_ros_rho, normal_from_gauss, omega_forms,
    DccwEnd, HalfPlaneForm, Puncture,
};
use dihedral_core::{Complex64, EndType, PathSegment, QuadratureConfig, TorusModulus, WeierstrassData};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn null_defect(data: &WeierstrassData, z: Complex64) -> f64 {
    let w = omega_forms(data, z).unwrap();
    let s = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    s.norm() / (w[0].norm_sqr() + w[1].norm_sqr() + w[2].norm_sqr())
}

#[test]
fn rational_form_matches_direct_evaluation() {
    // z (4 - z^2) / ((1 - z^2)(9 - z^2)), positive on (0, 1)
    let f = HalfPlaneForm::new(
        vec![(0.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (2.0, 1.0), (-2.0, 1.0), (3.0, -1.0), (-3.0, -1.0)],
        1.0,
        (0.0, 1.0),
    )
    .unwrap();
    for z in [c(0.5, 0.0), c(0.3, 0.8), c(-2.5, 0.1), c(4.0, 2.0)] {
        let direct = z * (c(4.0, 0.0) - z * z) / ((c(1.0, 0.0) - z * z) * (c(9.0, 0.0) - z * z));
        let got = f.eval_upper(z).unwrap();
        assert!((got - direct).norm() < 1e-13 * direct.norm().max(1.0), "{z}: {got} vs {direct}");
    }
}

#[test]
fn residues_agree_with_contour() {
    // 2 - z over z (z - 1): residues 2 at 0 and -1 at 1
    let f = HalfPlaneForm::new(vec![(0.0, -1.0), (1.0, -1.0), (2.0, 1.0)], 1.0, (0.0, 1.0)).unwrap();
    let r0 = f.residue(0.0).unwrap();
    let r1 = f.residue(1.0).unwrap();
    assert!((r0 - c(2.0, 0.0)).norm() < 1e-14 && (r1 - c(-1.0, 0.0)).norm() < 1e-14, "{r0} {r1}");
    let circle = contour_circle(0.0, 1.0, -1.0, 2.0, 0.5).unwrap();
    let v = circle_integral(&f, &circle, &QuadratureConfig::with_tol(1e-13)).unwrap();
    assert!((v - Complex64::i() * 2.0 * PI * (r0 + r1)).norm() < 1e-11, "{v}");
}

#[test]
fn residue_needs_integer_exponents() {
    let f = HalfPlaneForm::new(vec![(0.0, -0.9), (1.0, -1.1)], 1.0, (0.0, 1.0)).unwrap();
    assert!(f.residue(0.0).is_err());
}

#[test]
fn classic_end_models() {
    // catenoid G = z, dh = dz / z at 0
    assert_eq!(classify_orders(1.0, -1.0).kind, EndType::Catenoidal);
    // Enneper G = z, dh = z dz at infinity: orders -1 and -3 in w = 1/z
    assert_eq!(classify_orders(-1.0, -3.0).kind, EndType::Enneper);
    // Scherk G = z, dh = z dz / (z^4 - 1) at 1
    assert_eq!(classify_orders(0.0, -1.0).kind, EndType::Scherk);
    assert_eq!(classify_orders(0.0, 0.0).kind, EndType::Unclassified);
}

#[test]
fn dihedral_enneper_orders() {
    let (a, b) = de_limit_root();
    for n in 2..=12u32 {
        let d = de_data(&DeParams { a, b, alpha: 1.0 / n as f64, rho: 1.0 }).unwrap();
        let e = classify_end(&d, Puncture::Infinity);
        assert_eq!(e.kind, EndType::Enneper, "n={n}");
        assert_eq!(e.gauss_zero_order(), (n - 1) as i64, "n={n}");
        assert_eq!(e.dh_pole_order(), (n + 1) as i64, "n={n}");
        assert_eq!(e.multiplicity, n);
    }
}

#[test]
fn dccw_ends_change_type_with_alpha() {
    let p = DccwParams::equal_growth(1.9, 5.7, 0.0);
    let d0 = dccw_data(&p).unwrap();
    let d1 = dccw_data(&DccwParams { alpha: 0.1, ..p }).unwrap();
    for x in [p.a, -p.a, p.c, -p.c] {
        assert_eq!(classify_end(&d0, Puncture::Point(c(x, 0.0))).kind, EndType::Scherk);
        assert_eq!(classify_end(&d1, Puncture::Point(c(x, 0.0))).kind, EndType::Catenoidal);
    }
}

#[test]
fn lopez_ros_needs_positive_ratio() {
    let rho = lopez_ros_rho(c(0.0, 2.0), c(0.0, -8.0)).unwrap();
    assert!((rho - 2.0).abs() < 1e-15);
    assert!(lopez_ros_rho(c(1.0, 0.0), c(-1.0, 0.0)).is_err());
    assert!(lopez_ros_rho(c(0.0, 0.0), c(1.0, 0.0)).is_err());
}

#[test]
fn normal_is_unit_and_points_up_at_infinity() {
    for g in [c(0.0, 0.0), c(0.3, -2.0), c(1e6, 1e6)] {
        let n = normal_from_gauss(g);
        assert!((n[0] * n[0] + n[1] * n[1] + n[2] * n[2] - 1.0).abs() < 1e-14);
    }
    assert_eq!(normal_from_gauss(c(f64::INFINITY, 0.0)), [0.0, 0.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn null_identity_for_de(a in 1.5f64..2.8, gap in 0.3f64..1.5, alpha in 0.0f64..0.4, rho in 0.3f64..3.0,
                            x in -5.0f64..5.0, y in 0.01f64..5.0) {
        let d = de_data(&DeParams { a, b: a + gap, alpha, rho }).unwrap();
        prop_assert!(null_defect(&d, c(x, y)) < 1e-12);
    }

    #[test]
    fn null_identity_for_dccw(a in 1.5f64..2.5, b in 3.0f64..6.0, alpha in 0.0f64..0.3, x in -20.0f64..20.0, y in 0.01f64..5.0) {
        let d = dccw_data(&DccwParams::equal_growth(a, b, alpha)).unwrap();
        prop_assert!(null_defect(&d, c(x, y)) < 1e-12);
    }

    #[test]
    fn null_identity_for_dks(a in 0.1f64..0.35, cc in 0.1f64..0.35, alpha in 0.0f64..0.2, x in 0.01f64..0.49, y in 0.01f64..0.49) {
        let d = dks_data(&DksParams { a, c: cc, tau: TorusModulus::imaginary(1.0).unwrap(), alpha }).unwrap();
        prop_assume!((c(x, y) - c(0.5 - a, 0.0)).norm() > 1e-3);
        prop_assert!(null_defect(&d, c(x, y)) < 1e-12);
    }

    #[test]
    fn closed_loops_integrate_to_zero(x in -1.5f64..1.5, y in 0.3f64..1.5, r in 0.05f64..0.2) {
        // a triangle in the upper half-plane avoids every branch point
        let (a, b) = de_limit_root();
        let d = de_data(&DeParams { a, b, alpha: 0.13, rho: 1.2 }).unwrap();
        let p = [c(x, y), c(x + r, y), c(x, y + r)];
        let path = [PathSegment::line(p[0], p[1]), PathSegment::line(p[1], p[2]), PathSegment::line(p[2], p[0])];
        let v = integrate_map(&d, &path, p[0]).unwrap();
        prop_assert!(v.iter().all(|x| x.abs() < 1e-10), "{v:?}");
    }

    #[test]
    fn growth_rates_agree_on_the_equal_growth_curve(a in 1.2f64..3.0, b in 3.5f64..8.0, alpha in 0.0f64..0.3) {
        let p = DccwParams::equal_growth(a, b, alpha);
        let (ga, gc) = (growth_rate(&p, DccwEnd::A), growth_rate(&p, DccwEnd::C));
        prop_assert!((ga - gc).abs() <= 1e-12 * ga.abs().max(1.0));
    }
}
