use std::f64::consts::PI;

use approx::assert_relative_eq;
use dihedral_core::quadrature::{integrate_along, integrate_halfline, integrate_segment, GaussJacobi, PathSegment};
use dihedral_core::{Complex64, QuadError, QuadratureConfig};
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn one(_: Complex64) -> Complex64 {
    c(1.0, 0.0)
}

fn beta(p: f64, q: f64) -> f64 {
    (ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)).exp()
}

#[test]
fn arcsine_weight_gives_pi() {
    let r = integrate_segment(one, c(0.0, 0.0), c(1.0, 0.0), -0.5, -0.5, 1e-13).unwrap();
    assert!((r.value.re - PI).abs() < 1e-12, "{}", r.value);
    assert!(r.value.im.abs() < 1e-14);
}

#[test]
fn beta_three_halves_five_halves() {
    let r = integrate_segment(one, c(0.0, 0.0), c(1.0, 0.0), 0.5, 1.5, 1e-13).unwrap();
    assert_relative_eq!(r.value.re, PI / 16.0, max_relative = 1e-12);
}

#[test]
fn euler_reflection_at_small_alpha() {
    for alpha in [0.5, 0.2, 0.05, 0.01] {
        let r = integrate_segment(one, c(0.0, 0.0), c(1.0, 0.0), alpha - 1.0, -alpha, 1e-13).unwrap();
        assert_relative_eq!(r.value.re, PI / (PI * alpha).sin(), max_relative = 1e-11);
    }
}

#[test]
fn non_integrable_exponent_is_rejected() {
    let err = integrate_segment(one, c(0.0, 0.0), c(1.0, 0.0), -1.0, 0.0, 1e-10).unwrap_err();
    assert!(matches!(err, QuadError::BadExponent(_)), "{err:?}");
}

#[test]
fn empty_segment_is_zero() {
    let r = integrate_segment(one, c(0.3, 0.1), c(0.3, 0.1), -0.5, -0.5, 1e-10).unwrap();
    assert_eq!(r.value, c(0.0, 0.0));
}

#[test]
fn halfline_arcsine_tail() {
    // int_1^inf (t-1)^{-1/2} / t dt = pi
    let r = integrate_halfline(|t| c(1.0 / t, 0.0), 1.0, -0.5, -1.5, 1e-13).unwrap();
    assert!((r.value.re - PI).abs() < 1e-11, "{}", r.value);
}

#[test]
fn gauss_jacobi_is_exact_for_polynomials() {
    let (a, b) = (-0.3, 0.7);
    let rule = GaussJacobi::new(8, a, b).unwrap();
    // moments m_k of the weight: (a + b + 2 + k) m_{k+1} = (b - a) m_k + k m_{k-1}
    let mut m = vec![2f64.powf(a + b + 1.0) * beta(a + 1.0, b + 1.0)];
    m.push((b - a) * m[0] / (a + b + 2.0));
    for k in 1..15 {
        let next = ((b - a) * m[k] + k as f64 * m[k - 1]) / (a + b + 2.0 + k as f64);
        m.push(next);
    }
    for (k, exact) in m.iter().enumerate() {
        let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
        assert!((got - exact).abs() < 1e-12 * exact.abs().max(1.0), "k={k}: {got} vs {exact}");
    }
}

#[test]
fn full_circle_picks_up_residue() {
    let f = |z: Complex64| (z * z + 1.0) / (z - c(0.2, 0.1));
    let seg = PathSegment::full_circle(c(0.0, 0.0), 1.0);
    let r = integrate_along(f, &seg, &QuadratureConfig::with_tol(1e-13)).unwrap();
    let res = c(0.2, 0.1) * c(0.2, 0.1) + 1.0;
    assert!((r.value - Complex64::i() * 2.0 * PI * res).norm() < 1e-11, "{}", r.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weighted_monomials_match_beta(p in -0.9f64..2.0, q in -0.9f64..2.0, k in 0u32..4) {
        let f = |z: Complex64| z.powu(k);
        let r = integrate_segment(f, c(0.0, 0.0), c(1.0, 0.0), p, q, 1e-13).unwrap();
        let exact = beta(p + k as f64 + 1.0, q + 1.0);
        prop_assert!((r.value.re - exact).abs() < 1e-10 * exact.max(1.0));
    }

    #[test]
    fn linear_in_the_integrand(s in -3.0f64..3.0, t in -3.0f64..3.0, x in -1.0f64..1.0, y in 0.1f64..1.0) {
        let (a, b) = (c(x, y), c(x + 1.3, y + 0.4));
        let f = |z: Complex64| z.exp();
        let g = |z: Complex64| z * z;
        let run = |h: &dyn Fn(Complex64) -> Complex64| integrate_segment(h, a, b, -0.5, 0.25, 1e-13).unwrap().value;
        let lhs = run(&|z| f(z) * s + g(z) * t);
        let rhs = run(&f) * s + run(&g) * t;
        prop_assert!((lhs - rhs).norm() < 1e-11 * (1.0 + rhs.norm()));
    }

    #[test]
    fn reversal_negates(x in -1.0f64..1.0, y in 0.1f64..1.0, ea in -0.9f64..1.0, eb in -0.9f64..1.0) {
        let (a, b) = (c(x, y), c(x - 0.7, y + 0.9));
        let f = |z: Complex64| (z * 0.3).sin() + 1.0;
        let fwd = integrate_segment(f, a, b, ea, eb, 1e-13).unwrap().value;
        let back = integrate_segment(f, b, a, eb, ea, 1e-13).unwrap().value;
        prop_assert!((fwd + back).norm() < 1e-11 * (1.0 + fwd.norm()));
    }
}
