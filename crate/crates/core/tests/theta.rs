use std::f64::consts::PI;

use dihedral_core::theta::{log_theta, theta, theta_prime, theta_prime_zero, zero_count};
use dihedral_core::{Complex64, TorusModulus};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Triple-product form `2 q^{1/4} sin(pi z) prod (1 - q^{2n})(1 - 2 q^{2n} cos(2 pi z) + q^{4n})`
/// with nome `q = e^{i pi tau}`.
fn product_oracle(z: Complex64, tau: Complex64) -> Complex64 {
    let i = Complex64::i();
    let q = (i * PI * tau).exp();
    let q4 = (i * PI * tau / 4.0).exp();
    let cos2 = (z * 2.0 * PI).cos();
    let mut p = q4 * 2.0 * (z * PI).sin();
    let mut q2n = c(1.0, 0.0);
    for _ in 0..60 {
        q2n *= q * q;
        p *= (c(1.0, 0.0) - q2n) * (c(1.0, 0.0) - q2n * cos2 * 2.0 + q2n * q2n);
    }
    p
}

fn gap(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

#[test]
fn matches_triple_product_on_a_grid() {
    for t in [0.5, 1.0, 2.0] {
        let tau = TorusModulus::imaginary(t).unwrap();
        for k in 0..10 {
            for j in 0..10 {
                let z = c(-0.9 + 0.19 * k as f64, -t + 0.21 * t * j as f64);
                assert!(gap(theta(z, &tau), product_oracle(z, tau.tau())) < 1e-12, "z={z} tau={t}i");
            }
        }
    }
}

#[test]
fn modulus_must_lie_in_upper_half_plane() {
    assert!(TorusModulus::new(c(0.0, -1.0)).is_err());
    // rectangular lattices only
    assert!(TorusModulus::new(c(0.3, 0.8)).is_err());
    assert!(TorusModulus::imaginary(0.0).is_err());
}

#[test]
fn one_zero_per_cell() {
    for t in [0.5, 1.0, 2.0] {
        let tau = TorusModulus::imaginary(t).unwrap();
        for center in [c(0.0, 0.0), c(0.5, 0.5 * t), c(0.31, 0.17)] {
            let n = zero_count(center, &tau).unwrap();
            assert!((n - 1.0).abs() < 1e-9, "{n}");
        }
    }
}

#[test]
fn derivative_at_zero_is_product_of_eta_cubed() {
    // theta'(0) = 2 pi q^{1/4} prod (1 - q^{2n})^3
    let tau = TorusModulus::imaginary(1.0).unwrap();
    let q = (-PI).exp();
    let prod: f64 = (1..60).map(|n| (1.0 - q.powi(2 * n)).powi(3)).product();
    let expected = 2.0 * PI * q.powf(0.25) * prod;
    let got = theta_prime_zero(&tau);
    assert!((got.re - expected).abs() < 1e-13 && got.im.abs() < 1e-14, "{got} vs {expected}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn odd_and_real_on_conjugation(x in -2.0f64..2.0, y in -2.0f64..2.0, t in 0.4f64..2.5) {
        let tau = TorusModulus::imaginary(t).unwrap();
        let z = c(x, y);
        prop_assert!(gap(theta(-z, &tau), -theta(z, &tau)) < 1e-12);
        prop_assert!(gap(theta(z.conj(), &tau), theta(z, &tau).conj()) < 1e-12);
    }

    #[test]
    fn antiperiodic_and_quasiperiodic(x in -1.0f64..1.0, y in -1.0f64..1.0, t in 0.4f64..2.5) {
        let tau = TorusModulus::imaginary(t).unwrap();
        let z = c(x, y);
        let i = Complex64::i();
        prop_assert!(gap(theta(z + 1.0, &tau), -theta(z, &tau)) < 1e-12);
        let factor = (-i * PI * tau.tau() - i * 2.0 * PI * z).exp();
        prop_assert!(gap(theta(z + tau.tau(), &tau), -factor * theta(z, &tau)) < 1e-12);
    }

    #[test]
    fn derivative_matches_difference_quotient(x in -0.9f64..0.9, y in -0.4f64..0.4) {
        let tau = TorusModulus::imaginary(1.0).unwrap();
        let z = c(x, y);
        let h = 1e-5;
        let fd = (theta(z + h, &tau) - theta(z - h, &tau)) / (2.0 * h);
        prop_assert!(gap(theta_prime(z, &tau), fd) < 1e-8);
    }

    #[test]
    fn log_is_consistent_with_value(x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let tau = TorusModulus::imaginary(1.0).unwrap();
        let z = c(x, y);
        prop_assume!(theta(z, &tau).norm() > 1e-6);
        prop_assert!(gap(log_theta(z, &tau).exp(), theta(z, &tau)) < 1e-11);
    }
}
