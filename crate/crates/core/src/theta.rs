//! The odd Jacobi theta function on rectangular tori.
//!
//! `theta(z) = sum_n exp(pi i (n+1/2)^2 tau + 2 pi i (n+1/2)(z - 1/2))`, which
//! vanishes exactly on the lattice spanned by `1` and `tau`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ThetaError {
    #[error("modulus must be purely imaginary with positive imaginary part, got {0}")]
    BadModulus(Complex64),
    #[error("point {0} is not finite")]
    NonFinite(Complex64),
    #[error("point {z} lies outside the strip 0 <= Im z < Im tau")]
    OutsideStrip { z: Complex64 },
}

/// A rectangular modulus `tau = i t`, `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusModulus {
    tau: Complex64,
}

impl TorusModulus {
    pub fn new(tau: Complex64) -> Result<Self, ThetaError> {
        if tau.re != 0.0 || !(tau.im > 0.0) || !tau.im.is_finite() {
            return Err(ThetaError::BadModulus(tau));
        }
        Ok(Self { tau })
    }

    /// `tau = i * t`.
    pub fn imaginary(t: f64) -> Result<Self, ThetaError> {
        Self::new(Complex64::new(0.0, t))
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn im(&self) -> f64 {
        self.tau.im
    }

    /// Nome `q = exp(i pi tau)`, real in `(0, 1)`.
    pub fn nome(&self) -> f64 {
        (-PI * self.tau.im).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSeriesConfig {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for ThetaSeriesConfig {
    fn default() -> Self {
        Self { tol: 1e-17, max_terms: 200 }
    }
}

/// `z = z0 + m tau + k` with `z0` in the central cell.
struct Reduced {
    z0: Complex64,
    m: f64,
    k: f64,
}

fn reduce(z: Complex64, tau: &TorusModulus) -> Reduced {
    let m = (z.im / tau.im()).round();
    let shifted = z - tau.tau() * m;
    let k = shifted.re.round();
    Reduced { z0: shifted - k, m, k }
}

/// `log` of the factor relating `theta(z0 + m tau + k)` to `theta(z0)`.
///
/// The series is antiperiodic under `z -> z + 1`, so each unit shift in
/// either direction contributes a sign.
fn quasi_log_factor(z0: Complex64, m: f64, k: f64, tau: &TorusModulus) -> Complex64 {
    let i = Complex64::i();
    let odd = ((m + k) as i64).rem_euclid(2) == 1;
    let sign = if odd { i * PI } else { Complex64::new(0.0, 0.0) };
    sign - i * PI * m * m * tau.tau() - i * 2.0 * PI * m * z0
}

/// Returns `(theta(z0), theta'(z0))` from the series, `z0` in the central cell.
fn series(z0: Complex64, tau: &TorusModulus, cfg: &ThetaSeriesConfig) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let term = |n: i64| {
        let k = n as f64 + 0.5;
        let e = i * PI * k * k * tau.tau() + i * 2.0 * PI * k * (z0 - 0.5);
        let t = e.exp();
        (t, t * i * 2.0 * PI * k)
    };
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    // Terms n and -1-n pair up symmetrically about -1/2.
    for n in 0..cfg.max_terms as i64 {
        let (a, da) = term(n);
        let (b, db) = term(-1 - n);
        value += a + b;
        deriv += da + db;
        let size = a.norm().max(b.norm());
        if n > 0 && size <= cfg.tol * value.norm().max(deriv.norm()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (value, deriv)
}

pub fn theta(z: Complex64, tau: &TorusModulus) -> Complex64 {
    theta_with(z, tau, &ThetaSeriesConfig::default())
}

pub fn theta_with(z: Complex64, tau: &TorusModulus, cfg: &ThetaSeriesConfig) -> Complex64 {
    theta_and_derivative(z, tau, cfg).0
}

pub fn theta_prime(z: Complex64, tau: &TorusModulus) -> Complex64 {
    theta_and_derivative(z, tau, &ThetaSeriesConfig::default()).1
}

/// `theta'(0)`, from the termwise differentiated series.
pub fn theta_prime_zero(tau: &TorusModulus) -> Complex64 {
    series(Complex64::new(0.0, 0.0), tau, &ThetaSeriesConfig::default()).1
}

fn theta_and_derivative(z: Complex64, tau: &TorusModulus, cfg: &ThetaSeriesConfig) -> (Complex64, Complex64) {
    let r = reduce(z, tau);
    let (v0, d0) = if r.z0 == Complex64::new(0.0, 0.0) {
        (Complex64::new(0.0, 0.0), series(r.z0, tau, cfg).1)
    } else {
        series(r.z0, tau, cfg)
    };
    if r.m == 0.0 && r.k == 0.0 {
        return (v0, d0);
    }
    let f = quasi_log_factor(r.z0, r.m, r.k, tau).exp();
    let i = Complex64::i();
    (f * v0, f * (d0 - i * 2.0 * PI * r.m * v0))
}

/// `ln theta(z)` with the quasi-period factor applied in log space, so that
/// large `|Im z|` does not overflow. The imaginary part is not unwrapped.
pub fn log_theta(z: Complex64, tau: &TorusModulus) -> Complex64 {
    let r = reduce(z, tau);
    let (v0, _) = series(r.z0, tau, &ThetaSeriesConfig::default());
    v0.ln() + quasi_log_factor(r.z0, r.m, r.k, tau)
}

/// Continuous logarithm of `theta(z - s) / theta(z - s2)` for real `s`, `s2`
/// on the strip `0 <= Im z < Im tau`.
///
/// Built from the product expansion, so it is analytic in the open strip and
/// takes limits from above on the real axis. It is real on
/// `(max(s, s2) - 1, min(s, s2))`.
pub fn log_theta_ratio_strip(z: Complex64, s: f64, s2: f64, tau: &TorusModulus) -> Result<Complex64, ThetaError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(ThetaError::NonFinite(z));
    }
    if z.im < 0.0 || z.im >= tau.im() {
        return Err(ThetaError::OutsideStrip { z });
    }
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let w = (i * 2.0 * PI * z).exp();
    let e = |x: f64| Complex64::from_polar(1.0, -2.0 * PI * x);
    let mut l = i * PI * (s - s2) + (one - w * e(s)).ln() - (one - w * e(s2)).ln();
    let q2 = tau.nome() * tau.nome();
    let mut qm = q2;
    for _ in 0..200 {
        let up = |x: f64| (one - (i * 2.0 * PI * (z - x)).exp() * qm).ln() + (one - (-i * 2.0 * PI * (z - x)).exp() * qm).ln();
        let delta = up(s) - up(s2);
        l += delta;
        if delta.norm() < 1e-18 * l.norm().max(1.0) && qm < 1e-3 {
            break;
        }
        qm *= q2;
        if qm == 0.0 {
            break;
        }
    }
    Ok(l)
}

/// Winding number of `theta` around the boundary of the cell
/// `center + [-1/2, 1/2] + [-1/2, 1/2] tau`, i.e. the number of zeros inside.
pub fn zero_count(center: Complex64, tau: &TorusModulus) -> Result<f64, crate::quadrature::QuadError> {
    use crate::quadrature::integrate_segment;
    let half_t = tau.tau() * 0.5;
    let corners = [
        center - 0.5 - half_t,
        center + 0.5 - half_t,
        center + 0.5 + half_t,
        center - 0.5 + half_t,
    ];
    let log_deriv = |z: Complex64| {
        let (v, d) = theta_and_derivative(z, tau, &ThetaSeriesConfig::default());
        d / v
    };
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..4 {
        total += integrate_segment(log_deriv, corners[k], corners[(k + 1) % 4], 0.0, 0.0, 1e-12)?.value;
    }
    Ok((total / (Complex64::i() * 2.0 * PI)).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vanishes_at_lattice_points() {
        let tau = TorusModulus::imaginary(1.0).unwrap();
        assert_eq!(theta(c(0.0, 0.0), &tau), c(0.0, 0.0));
        assert!(theta(c(2.0, 1.0), &tau).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_rectangular_modulus() {
        assert!(TorusModulus::new(c(0.1, 1.0)).is_err());
        assert!(TorusModulus::new(c(0.0, -1.0)).is_err());
    }

    #[test]
    fn matches_product_formula() {
        let tau = TorusModulus::imaginary(0.8).unwrap();
        let q = tau.nome();
        let z = c(0.31, 0.17);
        let i = Complex64::i();
        let mut p = (z * PI).sin() * 2.0 * q.powf(0.25);
        for m in 1..60 {
            let q2m = q.powi(2 * m);
            p *= (1.0 - q2m) * (1.0 - (i * 2.0 * PI * z).exp() * q2m) * (1.0 - (-i * 2.0 * PI * z).exp() * q2m);
        }
        assert!((theta(z, &tau) - p).norm() < 1e-14);
    }

    #[test]
    fn quasi_periodicity_far_from_origin() {
        let tau = TorusModulus::imaginary(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let z = c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let lhs = theta(z + tau.tau() * 3.0, &tau);
            let f = (c(0.0, PI) - Complex64::i() * PI * 9.0 * tau.tau() - Complex64::i() * 6.0 * PI * z).exp();
            let rhs = f * theta(z, &tau);
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
            assert!(lhs.re.is_finite());
        }
    }

    #[test]
    fn antiperiodic_in_unit_shift() {
        let tau = TorusModulus::imaginary(2.0).unwrap();
        let z = c(0.23, -0.4);
        assert!((theta(z + 1.0, &tau) + theta(z, &tau)).norm() < 1e-14);
        assert!((theta(z - 3.0, &tau) + theta(z, &tau)).norm() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let tau = TorusModulus::imaginary(1.3).unwrap();
        let z = c(0.2, 0.4);
        let h = 1e-6;
        let fd = (theta(z + h, &tau) - theta(z - h, &tau)) / (2.0 * h);
        assert!((fd - theta_prime(z, &tau)).norm() < 1e-7 * fd.norm());
    }

    #[test]
    fn strip_log_ratio_matches_direct_ratio() {
        let tau = TorusModulus::imaginary(1.0).unwrap();
        let (s, s2) = (0.8, 0.2);
        for z in [c(0.1, 0.0), c(0.37, 0.21), c(0.62, 0.44), c(0.9, 0.05)] {
            let l = log_theta_ratio_strip(z, s, s2, &tau).unwrap();
            let direct = theta(z - s, &tau) / theta(z - s2, &tau);
            assert!((l.exp() - direct).norm() < 1e-12 * direct.norm(), "{z} {} {direct}", l.exp());
        }
        // real and positive left of the pole
        let l = log_theta_ratio_strip(c(0.1, 0.0), s, s2, &tau).unwrap();
        assert!(l.im.abs() < 1e-14);
    }

    #[test]
    fn single_zero_per_cell() {
        let tau = TorusModulus::imaginary(0.5).unwrap();
        let n = zero_count(c(0.0, 0.0), &tau).unwrap();
        assert!((n - 1.0).abs() < 1e-10);
    }
}
