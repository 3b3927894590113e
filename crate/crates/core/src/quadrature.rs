//! Complex line integrals along segments, circular arcs and half-lines.
//!
//! Every routine reduces to one adaptive kernel on `[0, 1]` that integrates
//! `g(t) t^p (1 - t)^q dt` with Gauss-Jacobi rules on the two end intervals and
//! Gauss-Legendre rules in the interior. Endpoint singularities are therefore
//! absorbed exactly into the rule weights instead of being chased by bisection,
//! which matters for exponents such as `alpha - 1` with `alpha` close to zero.
//!
//! Multivalued integrands are handled through [`BranchTracked`]: the integrand
//! exposes its branch points and is evaluated with the continuously unwrapped
//! argument of `z - p` for each branch point `p`. Along arcs and segments the
//! unwrapped argument is available in closed form, so the quadrature nodes can
//! be visited in any order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Default mixed absolute/relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default evaluation budget per call.
pub const DEFAULT_MAX_EVALS: usize = 1_000_000;

const LOW_ORDER: usize = 10;
const HIGH_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<V = Complex64> {
    pub value: V,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Values the adaptive kernel can accumulate: a complex number or a fixed
/// size array of them.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, s: Complex64) -> Self;
    /// Max-norm over components.
    fn norm(&self) -> f64;
    fn components(&self) -> Vec<Complex64>;

    fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, s: Complex64) -> Self {
        self * s
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
    fn components(&self) -> Vec<Complex64> {
        vec![*self]
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<const N: usize> QuadValue for [Complex64; N] {
    fn zero() -> Self {
        [Complex64::new(0.0, 0.0); N]
    }
    fn add(mut self, other: Self) -> Self {
        self.iter_mut().zip(other).for_each(|(a, b)| *a += b);
        self
    }
    fn sub(mut self, other: Self) -> Self {
        self.iter_mut().zip(other).for_each(|(a, b)| *a -= b);
        self
    }
    fn scale(mut self, s: Complex64) -> Self {
        self.iter_mut().for_each(|a| *a *= s);
        self
    }
    fn norm(&self) -> f64 {
        self.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
    fn components(&self) -> Vec<Complex64> {
        self.to_vec()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadError {
    #[error("endpoint exponent {0} must be greater than -1")]
    BadExponent(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence within {evaluations} evaluations (partial estimate {partial:?}, error {error_estimate:e})")]
    NonConvergence { partial: Vec<Complex64>, error_estimate: f64, evaluations: usize },
    #[error("path passes within {distance:e} of singular point {point}")]
    TooCloseToSingularity { point: Complex64, distance: f64 },
    #[error("decay exponent {0} does not give an integrable tail (need < -1)")]
    InsufficientDecay(f64),
    #[error("integrand is not finite at {0}")]
    NonFinite(Complex64),
}

/// Tolerance and budget shared by all integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_evals: DEFAULT_MAX_EVALS }
    }
}

impl QuadratureConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// One piece of an integration path.
///
/// Exponents attached to `Line` endpoints describe algebraic weights
/// `|z - start|^exp_start |end - z|^exp_end`; they are positive real weights,
/// any phase belongs to the integrand itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathSegment {
    Line { start: Complex64, end: Complex64, exp_start: f64, exp_end: f64 },
    /// Arc `center + radius e^{i theta}`, `theta` running from `theta_start` to
    /// `theta_end`; the sign of the difference is the winding direction.
    Arc { center: Complex64, radius: f64, theta_start: f64, theta_end: f64 },
    /// `[start, +inf)` along the real axis. `decay` is the exponent of the full
    /// weighted integrand at infinity.
    HalfLine { start: f64, exp_start: f64, decay: f64 },
}

impl PathSegment {
    pub fn line(start: Complex64, end: Complex64) -> Self {
        PathSegment::Line { start, end, exp_start: 0.0, exp_end: 0.0 }
    }

    pub fn arc(center: Complex64, radius: f64, theta_start: f64, theta_end: f64) -> Self {
        PathSegment::Arc { center, radius, theta_start, theta_end }
    }

    pub fn full_circle(center: Complex64, radius: f64) -> Self {
        Self::arc(center, radius, 0.0, 2.0 * PI)
    }

    pub fn start_point(&self) -> Complex64 {
        match *self {
            PathSegment::Line { start, .. } => start,
            PathSegment::Arc { center, radius, theta_start, .. } => {
                center + Complex64::from_polar(radius, theta_start)
            }
            PathSegment::HalfLine { start, .. } => Complex64::new(start, 0.0),
        }
    }

    /// End point; `None` for half-lines.
    pub fn end_point(&self) -> Option<Complex64> {
        match *self {
            PathSegment::Line { end, .. } => Some(end),
            PathSegment::Arc { center, radius, theta_end, .. } => {
                Some(center + Complex64::from_polar(radius, theta_end))
            }
            PathSegment::HalfLine { .. } => None,
        }
    }

    pub fn reversed(&self) -> Option<Self> {
        match *self {
            PathSegment::Line { start, end, exp_start, exp_end } => {
                Some(PathSegment::Line { start: end, end: start, exp_start: exp_end, exp_end: exp_start })
            }
            PathSegment::Arc { center, radius, theta_start, theta_end } => Some(PathSegment::Arc {
                center,
                radius,
                theta_start: theta_end,
                theta_end: theta_start,
            }),
            PathSegment::HalfLine { .. } => None,
        }
    }

    /// Increment of the continuous argument of `z - point` between the start
    /// of the segment and the point at parameter `s` in `[0, 1]`.
    ///
    /// For a line starting exactly at `point` the argument is constant.
    pub fn arg_increment(&self, point: Complex64, s: f64) -> f64 {
        match *self {
            PathSegment::Line { start, end, .. } => {
                let z = start + (end - start) * s;
                line_arg_increment(point, start, z)
            }
            PathSegment::Arc { center, radius, theta_start, theta_end } => {
                let theta = theta_start + (theta_end - theta_start) * s;
                arc_arg_increment(point, center, radius, theta_start, theta)
            }
            PathSegment::HalfLine { start, .. } => {
                // t = start - 1 + 1/s^2 runs along the real axis.
                let z = if s <= 0.0 { f64::INFINITY } else { start - 1.0 + 1.0 / (s * s) };
                let z = if z.is_finite() { z } else { f64::MAX };
                line_arg_increment(point, Complex64::new(start, 0.0), Complex64::new(z, 0.0))
            }
        }
    }
}

/// `Arg((z - p) / (start - p))`; zero when the segment starts at `p`.
pub fn line_arg_increment(p: Complex64, start: Complex64, z: Complex64) -> f64 {
    let d0 = start - p;
    if d0.norm() == 0.0 {
        return 0.0;
    }
    ((z - p) / d0).arg()
}

/// Continuous argument change of `c + R e^{i theta} - p` from `theta_start`
/// to `theta`.
pub fn arc_arg_increment(p: Complex64, c: Complex64, r: f64, theta_start: f64, theta: f64) -> f64 {
    let d = c - p;
    let unit = |t: f64| Complex64::from_polar(1.0, t);
    if d.norm() < r {
        let k = d / r;
        let a = |t: f64| t + (Complex64::new(1.0, 0.0) + k * unit(-t)).arg();
        a(theta) - a(theta_start)
    } else {
        let k = r / d;
        let a = |t: f64| (Complex64::new(1.0, 0.0) + k * unit(t)).arg();
        a(theta) - a(theta_start)
    }
}

/// A (possibly multivalued) integrand that can be evaluated on a chosen branch.
///
/// `args[k]` is the unwrapped argument of `z - branch_points()[k]`.
pub trait BranchTracked {
    fn branch_points(&self) -> &[Complex64];
    fn eval_with_args(&self, z: Complex64, args: &[f64]) -> Complex64;
}

/// Integral of `f(z) |z-a|^{exp_a} |b-z|^{exp_b} dz` along the straight segment `a -> b`.
pub fn integrate_segment<F>(
    f: F,
    a: Complex64,
    b: Complex64,
    exp_a: f64,
    exp_b: f64,
    tol: f64,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(Complex64) -> Complex64,
{
    integrate_segment_with(f, a, b, exp_a, exp_b, &QuadratureConfig::with_tol(tol))
}

pub fn integrate_segment_with<F>(
    f: F,
    a: Complex64,
    b: Complex64,
    exp_a: f64,
    exp_b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(Complex64) -> Complex64,
{
    check_exponent(exp_a)?;
    check_exponent(exp_b)?;
    let delta = b - a;
    let len = delta.norm();
    if len == 0.0 {
        return Ok(QuadratureResult { value: Complex64::new(0.0, 0.0), error_estimate: 0.0, evaluations: 0 });
    }
    let scale = delta * len.powf(exp_a + exp_b);
    adaptive(|t| f(a + delta * t) * scale, exp_a, exp_b, cfg)
}

/// Integral of a single-valued (possibly vector-valued) `f` along one path
/// piece. Line weights and half-line decay are honoured as in the scalar
/// routines.
pub fn integrate_along<V, F>(f: F, seg: &PathSegment, cfg: &QuadratureConfig) -> Result<QuadratureResult<V>, QuadError>
where
    V: QuadValue,
    F: Fn(Complex64) -> V,
{
    match *seg {
        PathSegment::Line { start, end, exp_start, exp_end } => {
            check_exponent(exp_start)?;
            check_exponent(exp_end)?;
            let delta = end - start;
            let len = delta.norm();
            if len == 0.0 {
                return Ok(QuadratureResult { value: V::zero(), error_estimate: 0.0, evaluations: 0 });
            }
            let scale = delta * len.powf(exp_start + exp_end);
            adaptive(|t| f(start + delta * t).scale(scale), exp_start, exp_end, cfg)
        }
        PathSegment::Arc { center, radius, theta_start, theta_end } => {
            let span = theta_end - theta_start;
            adaptive(
                |t| {
                    let e = Complex64::from_polar(1.0, theta_start + span * t);
                    f(center + e * radius).scale(Complex64::new(0.0, radius * span) * e)
                },
                0.0,
                0.0,
                cfg,
            )
        }
        PathSegment::HalfLine { start, exp_start, decay } => {
            halfline_kernel(|t, _| f(Complex64::new(t, 0.0)), start, exp_start, decay, cfg)
        }
    }
}

/// Integral of a single-valued `f` along an arc.
pub fn integrate_arc_fn<F>(
    f: F,
    center: Complex64,
    radius: f64,
    theta_start: f64,
    theta_end: f64,
    tol: f64,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(Complex64) -> Complex64,
{
    let cfg = QuadratureConfig::with_tol(tol);
    let span = theta_end - theta_start;
    adaptive(
        |t| {
            let e = Complex64::from_polar(1.0, theta_start + span * t);
            f(center + e * radius) * Complex64::new(0.0, radius * span) * e
        },
        0.0,
        0.0,
        &cfg,
    )
}

/// Integral of a branch-tracked integrand along an arc.
///
/// `start_args` holds the unwrapped arguments of `z - p` at the arc's start
/// point; the branch is continued continuously from there. Arcs passing within
/// `1e-9 * radius` of a branch point are rejected.
pub fn integrate_arc<B: BranchTracked + ?Sized>(
    f: &B,
    center: Complex64,
    radius: f64,
    theta_start: f64,
    theta_end: f64,
    start_args: &[f64],
    tol: f64,
) -> Result<QuadratureResult, QuadError> {
    let points = f.branch_points();
    assert_eq!(points.len(), start_args.len(), "one start argument per branch point");
    let margin = 1e-9 * radius.max(f64::MIN_POSITIVE);
    for &p in points {
        let distance = ((center - p).norm() - radius).abs();
        if distance <= margin {
            return Err(QuadError::TooCloseToSingularity { point: p, distance });
        }
    }
    let seg = PathSegment::arc(center, radius, theta_start, theta_end);
    integrate_tracked(f, &seg, start_args, &QuadratureConfig::with_tol(tol))
}

/// Integral of a branch-tracked integrand along any line or arc segment.
pub fn integrate_tracked<B: BranchTracked + ?Sized>(
    f: &B,
    seg: &PathSegment,
    start_args: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult, QuadError> {
    let points = f.branch_points();
    let eval = |s: f64, z: Complex64| {
        let args: Vec<f64> =
            points.iter().zip(start_args).map(|(&p, &a0)| a0 + seg.arg_increment(p, s)).collect();
        f.eval_with_args(z, &args)
    };
    match *seg {
        PathSegment::Line { start, end, exp_start, exp_end } => {
            check_exponent(exp_start)?;
            check_exponent(exp_end)?;
            let delta = end - start;
            let len = delta.norm();
            if len == 0.0 {
                return Ok(QuadratureResult { value: Complex64::new(0.0, 0.0), error_estimate: 0.0, evaluations: 0 });
            }
            let scale = delta * len.powf(exp_start + exp_end);
            adaptive(|t| eval(t, start + delta * t) * scale, exp_start, exp_end, cfg)
        }
        PathSegment::Arc { center, radius, theta_start, theta_end } => {
            let span = theta_end - theta_start;
            adaptive(
                |t| {
                    let e = Complex64::from_polar(1.0, theta_start + span * t);
                    eval(t, center + e * radius) * Complex64::new(0.0, radius * span) * e
                },
                0.0,
                0.0,
                cfg,
            )
        }
        PathSegment::HalfLine { start, exp_start, decay } => {
            halfline_kernel(|t, s| eval(s, Complex64::new(t, 0.0)), start, exp_start, decay, cfg)
        }
    }
}

/// Improper integral `int_start^inf f(t) (t - start)^{exp_start} dt` of a
/// real-variable integrand whose full weighted form decays like
/// `t^{decay_exponent}`.
///
/// The tail is compactified with `t = start - 1 + 1/s^2`, `s` in `(0, 1]`.
pub fn integrate_halfline<F>(
    f: F,
    start: f64,
    exp_start: f64,
    decay_exponent: f64,
    tol: f64,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(f64) -> Complex64,
{
    halfline_kernel(|t, _| f(t), start, exp_start, decay_exponent, &QuadratureConfig::with_tol(tol))
}

fn halfline_kernel<V, F>(
    f: F,
    start: f64,
    exp_start: f64,
    decay: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult<V>, QuadError>
where
    V: QuadValue,
    F: Fn(f64, f64) -> V,
{
    check_exponent(exp_start)?;
    if !(decay < -1.0) {
        return Err(QuadError::InsufficientDecay(decay));
    }
    // Near s = 0 the transformed integrand behaves like s^{-2 decay - 3}.
    let p = -2.0 * decay - 3.0;
    let e = exp_start;
    adaptive(
        |s| {
            let t = start - 1.0 + 1.0 / (s * s);
            // (t - start)^e = (1-s)^e (1+s)^e s^{-2e}; dt = 2 s^{-3} ds
            let w = (1.0 + s).powf(e) * s.powf(-2.0 * e - 3.0 - p) * 2.0;
            f(t, s).scale(Complex64::new(w, 0.0))
        },
        p,
        e,
        cfg,
    )
}

fn check_exponent(e: f64) -> Result<(), QuadError> {
    if e.is_finite() && e > -1.0 {
        Ok(())
    } else {
        Err(QuadError::BadExponent(e))
    }
}

/// Nodes and weights on `[-1, 1]` for the weight `(1 - x)^alpha (1 + x)^beta`.
#[derive(Debug, Clone)]
pub struct GaussJacobi {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    /// Golub-Welsch construction from the Jacobi three-term recurrence.
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self, QuadError> {
        check_exponent(alpha)?;
        check_exponent(beta)?;
        assert!(n >= 1);
        let ab = alpha + beta;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let kf = k as f64;
            let diag = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            m[(k, k)] = diag;
            if k + 1 < n {
                let j = kf + 1.0;
                let b = if k == 0 {
                    4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
                } else {
                    4.0 * j * (j + alpha) * (j + beta) * (j + ab)
                        / ((2.0 * j + ab).powi(2) * (2.0 * j + ab + 1.0) * (2.0 * j + ab - 1.0))
                };
                m[(k, k + 1)] = b.sqrt();
                m[(k + 1, k)] = b.sqrt();
            }
        }
        let mu0 = ((ab + 1.0) * 2f64.ln() + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let eig = SymmetricEigen::new(m);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
        Ok(Self { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() })
    }

    pub fn legendre(n: usize) -> Self {
        Self::new(n, 0.0, 0.0).expect("zero exponents are valid")
    }

    pub fn integrate<F: Fn(f64) -> Complex64>(&self, a: f64, b: f64, f: F) -> Complex64 {
        self.integrate_values(a, b, f)
    }

    pub fn integrate_values<V: QuadValue, F: Fn(f64) -> V>(&self, a: f64, b: f64, f: F) -> V {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let sum = self
            .nodes
            .iter()
            .zip(&self.weights)
            .fold(V::zero(), |acc, (&x, &w)| acc.add(f(mid + half * x).scale(Complex64::new(w, 0.0))));
        sum.scale(Complex64::new(half, 0.0))
    }
}

fn legendre_pair() -> &'static (GaussJacobi, GaussJacobi) {
    static RULES: OnceLock<(GaussJacobi, GaussJacobi)> = OnceLock::new();
    RULES.get_or_init(|| (GaussJacobi::legendre(LOW_ORDER), GaussJacobi::legendre(HIGH_ORDER)))
}

struct Rules {
    /// weight t^p on the left end interval
    left: (GaussJacobi, GaussJacobi),
    /// weight (1-t)^q on the right end interval
    right: (GaussJacobi, GaussJacobi),
    /// both weights, used while the interval is still [0, 1]
    both: (GaussJacobi, GaussJacobi),
}

impl Rules {
    fn new(p: f64, q: f64) -> Result<Self, QuadError> {
        let pair = |alpha: f64, beta: f64| -> Result<(GaussJacobi, GaussJacobi), QuadError> {
            if alpha == 0.0 && beta == 0.0 {
                Ok(legendre_pair().clone())
            } else {
                Ok((GaussJacobi::new(LOW_ORDER, alpha, beta)?, GaussJacobi::new(HIGH_ORDER, alpha, beta)?))
            }
        };
        // In the (1-x)^alpha (1+x)^beta convention the left end carries beta.
        Ok(Self { left: pair(0.0, p)?, right: pair(q, 0.0)?, both: pair(q, p)? })
    }
}

struct Interval<V> {
    lo: f64,
    hi: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Interval<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Interval<V> {}
impl<V> PartialOrd for Interval<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Interval<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Global adaptive integration of `g(t) t^p (1-t)^q` over `[0, 1]`.
fn adaptive<V, G>(g: G, p: f64, q: f64, cfg: &QuadratureConfig) -> Result<QuadratureResult<V>, QuadError>
where
    V: QuadValue,
    G: Fn(f64) -> V,
{
    check_exponent(p)?;
    check_exponent(q)?;
    if !(cfg.tol > 0.0) {
        return Err(QuadError::BadTolerance(cfg.tol));
    }
    let rules = Rules::new(p, q)?;
    let mut evaluations = 0usize;

    let estimate = |lo: f64, hi: f64, evals: &mut usize| -> Result<(V, f64), QuadError> {
        let at_left = lo == 0.0 && p != 0.0;
        let at_right = hi == 1.0 && q != 0.0;
        let h = hi - lo;
        // Weight factors outside the rule: t^p on the right-end interval and
        // (1-t)^q on the left-end interval are smooth there.
        let (pair, scale): (&(GaussJacobi, GaussJacobi), f64) = match (at_left, at_right) {
            (true, true) => (&rules.both, (0.5 * h).powf(p + q)),
            (true, false) => (&rules.left, (0.5 * h).powf(p)),
            (false, true) => (&rules.right, (0.5 * h).powf(q)),
            (false, false) => (legendre_pair(), 1.0),
        };
        let weighted = |t: f64| {
            let mut w = 1.0;
            if !at_left && p != 0.0 {
                w *= t.powf(p);
            }
            if !at_right && q != 0.0 {
                w *= (1.0 - t).powf(q);
            }
            g(t).scale(Complex64::new(w, 0.0))
        };
        let s = Complex64::new(scale, 0.0);
        let low = pair.0.integrate_values(lo, hi, &weighted).scale(s);
        let high = pair.1.integrate_values(lo, hi, &weighted).scale(s);
        *evals += LOW_ORDER + HIGH_ORDER;
        if !high.is_finite() {
            return Err(QuadError::NonFinite(Complex64::new(0.5 * (lo + hi), 0.0)));
        }
        Ok((high, high.sub(low).norm()))
    };

    let (v0, e0) = estimate(0.0, 1.0, &mut evaluations)?;
    let mut heap = BinaryHeap::new();
    heap.push(Interval { lo: 0.0, hi: 1.0, value: v0, error: e0 });
    let mut total = v0;
    let mut total_err = e0;
    loop {
        let target = cfg.tol * total.norm().max(1.0);
        if total_err <= target {
            return Ok(QuadratureResult { value: total, error_estimate: total_err, evaluations });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        let exhausted = mid <= worst.lo || mid >= worst.hi;
        if exhausted || evaluations + 2 * (LOW_ORDER + HIGH_ORDER) > cfg.max_evals {
            return Err(QuadError::NonConvergence {
                partial: total.components(),
                error_estimate: total_err,
                evaluations,
            });
        }
        let (vl, el) = estimate(worst.lo, mid, &mut evaluations)?;
        let (vr, er) = estimate(mid, worst.hi, &mut evaluations)?;
        total = total.add(vl).add(vr).sub(worst.value);
        total_err += el + er - worst.error;
        heap.push(Interval { lo: worst.lo, hi: mid, value: vl, error: el });
        heap.push(Interval { lo: mid, hi: worst.hi, value: vr, error: er });
        if heap.len() % 64 == 0 {
            // Refresh the running sums to limit cancellation drift.
            total = heap.iter().fold(V::zero(), |acc, i| acc.add(i.value));
            total_err = heap.iter().map(|i| i.error).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one(_: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn beta_half_half_is_pi() {
        let r = integrate_segment(one, 0.0.into(), 1.0.into(), -0.5, -0.5, 1e-12).unwrap();
        assert_relative_eq!(r.value.re, PI, max_relative = 1e-12);
        assert!(r.value.im.abs() < 1e-14);
    }

    #[test]
    fn unit_interval_length() {
        let r = integrate_segment(one, 0.0.into(), 1.0.into(), 0.0, 0.0, 1e-12).unwrap();
        assert_relative_eq!(r.value.re, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn euler_reflection_at_one_third() {
        let alpha = 1.0 / 3.0;
        let r = integrate_segment(one, 0.0.into(), 1.0.into(), alpha - 1.0, -alpha, 1e-12).unwrap();
        assert_relative_eq!(r.value.re, PI / (PI * alpha).sin(), max_relative = 1e-11);
    }

    #[test]
    fn rejects_nonintegrable_exponent() {
        let r = integrate_segment(one, 0.0.into(), 1.0.into(), -1.0, 0.0, 1e-10);
        assert_eq!(r, Err(QuadError::BadExponent(-1.0)));
        assert!(integrate_halfline(|_| Complex64::new(1.0, 0.0), 1.0, 0.0, -1.0, 1e-10).is_err());
    }

    #[test]
    fn budget_exhaustion_reports_partial() {
        let cfg = QuadratureConfig { tol: 1e-14, max_evals: 200 };
        let r = integrate_segment_with(
            |z: Complex64| (z * 200.0).sin(),
            0.0.into(),
            1.0.into(),
            0.0,
            0.0,
            &cfg,
        );
        match r {
            Err(QuadError::NonConvergence { evaluations, .. }) => assert!(evaluations <= 200),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn residue_of_inverse_z() {
        let r = integrate_arc_fn(|z| 1.0 / z, 0.0.into(), 1.0, 0.0, 2.0 * PI, 1e-12).unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-12);
    }

    #[test]
    fn constant_over_arc_gives_chord() {
        let c = Complex64::new(0.3, -0.2);
        let r = integrate_arc_fn(one, c, 1.7, 0.4, 2.9, 1e-12).unwrap();
        let chord = Complex64::from_polar(1.7, 2.9) - Complex64::from_polar(1.7, 0.4);
        assert!((r.value - chord).norm() < 1e-12);
    }

    #[test]
    fn inverse_square_tail() {
        let r = integrate_halfline(|t| Complex64::new(1.0 / (t * t), 0.0), 1.0, 0.0, -2.0, 1e-12).unwrap();
        assert_relative_eq!(r.value.re, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn halfline_beta_substitution() {
        // u = 1/t^2 maps the integral to B(1/4, 1/2) / 2.
        let r = integrate_halfline(
            |t| Complex64::new(1.0 / (t.sqrt() * (t + 1.0).sqrt()), 0.0),
            1.0,
            -0.5,
            -1.5,
            1e-12,
        )
        .unwrap();
        let beta = (ln_gamma(0.25) + ln_gamma(0.5) - ln_gamma(0.75)).exp();
        assert_relative_eq!(r.value.re, 0.5 * beta, max_relative = 1e-11);
    }

    #[test]
    fn jacobi_rule_integrates_polynomials_exactly() {
        let rule = GaussJacobi::new(6, 0.3, -0.6).unwrap();
        // int_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
        let exact = ((0.3 - 0.6 + 1.0) * 2f64.ln() + ln_gamma(1.3) + ln_gamma(0.4) - ln_gamma(1.7)).exp();
        let got = rule.integrate(-1.0, 1.0, |_| Complex64::new(1.0, 0.0));
        assert_relative_eq!(got.re, exact, max_relative = 1e-13);
    }

    #[test]
    fn arc_argument_tracking_winds_once() {
        let inc = arc_arg_increment(Complex64::new(0.2, 0.1), 0.0.into(), 1.0, 0.0, 2.0 * PI);
        assert_relative_eq!(inc, 2.0 * PI, max_relative = 1e-14);
        let outside = arc_arg_increment(Complex64::new(3.0, 0.0), 0.0.into(), 1.0, 0.0, 2.0 * PI);
        assert!(outside.abs() < 1e-14);
    }
}
