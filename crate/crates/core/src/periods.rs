//! Period problems of the three families.
//!
//! Each family has a residual map whose zeros close the periods, a closed form
//! at `alpha = 0` where one is known, and a damped Newton solver with
//! continuation in `alpha` (and in `tau` for the torus family).
//!
//! Reductions to one real number per complex condition:
//! - DE: both ratio differences lie on `e^{-i pi alpha} R`; keep `Re(e^{i pi alpha} P_k)`.
//! - DCCW: `P_k / (-2 pi i)` is real at `alpha = 0`; keep `Re(P_1 / (-2 pi i))` and
//!   `Re(e^{-i pi alpha} P_2 / (-2 pi i))`.
//! - DKS: keep `Re P_1` and `Im(e^{i pi alpha} P_2)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::quadrature::{
    integrate_along, integrate_halfline, integrate_tracked, PathSegment, QuadError, QuadratureConfig,
};
use crate::theta::TorusModulus;
use crate::weierstrass::{lopez_ros_rho, FormError, HalfPlaneForm, ThetaBracket, TorusForm, WeierstrassData};

/// A solution is accepted when the residual norm is below this.
pub const SOLVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PeriodError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("quadrature along {contour} failed: {source}")]
    Quadrature {
        contour: String,
        #[source]
        source: QuadError,
    },
    #[error("form evaluation failed: {0}")]
    Form(#[from] FormError),
    #[error("Jacobian numerically singular at {at:?} (condition estimate {condition:.3e})")]
    SingularJacobian { at: [f64; 2], condition: f64 },
    #[error("Newton stalled at {last:?} with residual norm {norm:.3e}")]
    Diverged { last: [f64; 2], norm: f64 },
}

fn invalid(msg: impl Into<String>) -> PeriodError {
    PeriodError::InvalidParams(msg.into())
}

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl DeParams {
    pub fn validate(&self) -> Result<(), PeriodError> {
        if !(1.0 < self.a && self.a < self.b && self.b.is_finite()) {
            return Err(invalid(format!("DE needs 1 < a < b, got a = {}, b = {}", self.a, self.b)));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha = {} outside [0, 1)", self.alpha)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho = {} must be positive", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DccwParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
}

impl DccwParams {
    /// Parameters with `c = b^2 / a` (equal growth of the two catenoidal ends).
    pub fn equal_growth(a: f64, b: f64, alpha: f64) -> Self {
        Self { a, b, c: b * b / a, alpha }
    }

    pub fn validate(&self) -> Result<(), PeriodError> {
        if !(1.0 < self.a && self.a < self.b && self.b < self.c && self.c.is_finite()) {
            return Err(invalid(format!(
                "DCCW needs 1 < a < b < c, got a = {}, b = {}, c = {}",
                self.a, self.b, self.c
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha = {} outside [0, 1)", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DksParams {
    pub a: f64,
    pub c: f64,
    pub tau: TorusModulus,
    pub alpha: f64,
}

impl DksParams {
    /// Derived `b = a (1 - alpha) + alpha / 2`.
    pub fn b(&self) -> f64 {
        self.a * (1.0 - self.alpha) + 0.5 * self.alpha
    }

    pub fn validate(&self) -> Result<(), PeriodError> {
        if !(self.a > 0.0 && self.a < 0.5) {
            return Err(invalid(format!("DKS needs a in (0, 1/2), got {}", self.a)));
        }
        if !(self.c > 0.0 && self.c < 0.5 * self.tau.im()) {
            return Err(invalid(format!("DKS needs c in (0, Im tau / 2), got {}", self.c)));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha = {} outside [0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// Reduced residual vector and its Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodResidual {
    pub r: [f64; 2],
    pub norm: f64,
}

impl PeriodResidual {
    pub fn new(r: [f64; 2]) -> Self {
        Self { r, norm: r[0].hypot(r[1]) }
    }
}

/// Quadrature tolerance and where each circle sits between its bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodConfig {
    pub quad: QuadratureConfig,
    /// Position of the radius in `(0, 1)` between the smallest admissible
    /// radius (through the enclosed points) and the largest.
    pub radius_fraction: f64,
}

impl Default for PeriodConfig {
    fn default() -> Self {
        Self { quad: QuadratureConfig::with_tol(1e-12), radius_fraction: 0.5 }
    }
}

/// Circle in the plane centred on the real axis, enclosing `[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourCircle {
    pub label: String,
    pub center: f64,
    pub radius: f64,
}

/// Circle around `[i, j]` that keeps `i_prev` and `j_next` outside. Infinite
/// bounds mean no constraint on that side.
pub fn contour_circle(i: f64, j: f64, i_prev: f64, j_next: f64, fraction: f64) -> Result<ContourCircle, PeriodError> {
    if !(i_prev < i && i < j && j < j_next) {
        return Err(invalid(format!("points {i_prev} < {i} < {j} < {j_next} are not ordered")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid(format!("radius fraction {fraction} outside (0, 1)")));
    }
    let center = 0.5 * (i + j);
    let lo = 0.5 * (j - i);
    let hi = (center - i_prev).min(j_next - center);
    if !hi.is_finite() {
        return Err(invalid("circle needs at least one finite outer point"));
    }
    Ok(ContourCircle { label: format!("gamma_{{{i},{j}}}"), center, radius: lo + fraction * (hi - lo) })
}

/// Integral of `form` once counter-clockwise around `circle`, starting on the
/// real axis at its rightmost point with the upper-half-plane branch.
pub fn circle_integral(
    form: &HalfPlaneForm,
    circle: &ContourCircle,
    cfg: &QuadratureConfig,
) -> Result<Complex64, PeriodError> {
    let quad_err = |source| PeriodError::Quadrature { contour: circle.label.clone(), source };
    let margin = 1e-9 * circle.radius;
    for r in form.singular_roots() {
        let distance = ((r - circle.center).abs() - circle.radius).abs();
        if distance <= margin {
            return Err(quad_err(QuadError::TooCloseToSingularity { point: cx(r), distance }));
        }
    }
    let start = cx(circle.center + circle.radius);
    let seg = PathSegment::full_circle(cx(circle.center), circle.radius);
    integrate_tracked(form, &seg, &form.upper_args(start), cfg).map(|r| r.value).map_err(quad_err)
}

// ---------------------------------------------------------------------------
// DE: dihedralized Chen-Gackstatter

/// `(phi1, phi2, dh)` for DE. `phi1 = G dh / rho`, `phi2 = rho dh / G`, `dh = dz`.
pub fn de_forms(a: f64, b: f64, alpha: f64) -> Result<(HalfPlaneForm, HalfPlaneForm, HalfPlaneForm), PeriodError> {
    DeParams { a, b, alpha, rho: 1.0 }.validate()?;
    let e = 1.0 - alpha;
    let f1 = vec![(0.0, e), (1.0, -e), (-1.0, -e), (a, e), (-a, e), (b, -e), (-b, -e)];
    let f2 = f1.iter().map(|&(r, e)| (r, -e)).collect();
    Ok((
        HalfPlaneForm::new(f1, 1.0, (0.0, 1.0))?,
        HalfPlaneForm::new(f2, 1.0, (0.0, 1.0))?,
        HalfPlaneForm::new(Vec::new(), 1.0, (0.0, 1.0))?,
    ))
}

/// The three circles `gamma_{0,1}`, `gamma_{1,a}`, `gamma_{a,b}`.
pub fn de_circles(a: f64, b: f64, fraction: f64) -> Result<[ContourCircle; 3], PeriodError> {
    Ok([
        contour_circle(0.0, 1.0, -1.0, a, fraction)?,
        contour_circle(1.0, a, 0.0, b, fraction)?,
        contour_circle(a, b, 1.0, f64::INFINITY, fraction)?,
    ])
}

/// Circles of the mirrored conditions `gamma_{-1,0}`, `gamma_{-a,-1}`, `gamma_{-b,-a}`.
pub fn de_mirror_circles(a: f64, b: f64, fraction: f64) -> Result<[ContourCircle; 3], PeriodError> {
    Ok([
        contour_circle(-1.0, 0.0, -a, 1.0, fraction)?,
        contour_circle(-a, -1.0, -b, 0.0, fraction)?,
        contour_circle(-b, -a, f64::NEG_INFINITY, -1.0, fraction)?,
    ])
}

/// Circle integrals of `phi1` and `phi2` over the three DE circles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DePeriods {
    pub phi1: [Complex64; 3],
    pub phi2: [Complex64; 3],
}

impl DePeriods {
    /// `I_k(phi1) / I_{k+1}(phi1) - conj(I_k(phi2)) / conj(I_{k+1}(phi2))`.
    pub fn ratio_differences(&self) -> [Complex64; 2] {
        let d = |k: usize| {
            self.phi1[k] / self.phi1[k + 1] - self.phi2[k].conj() / self.phi2[k + 1].conj()
        };
        [d(0), d(1)]
    }

    /// Lopez-Ros factor from the `gamma_{0,1}` integrals.
    pub fn rho(&self) -> Result<f64, PeriodError> {
        Ok(lopez_ros_rho(self.phi1[0], self.phi2[0])?)
    }
}

pub fn de_periods(a: f64, b: f64, alpha: f64, cfg: &PeriodConfig) -> Result<DePeriods, PeriodError> {
    let (f1, f2, _) = de_forms(a, b, alpha)?;
    let circles = de_circles(a, b, cfg.radius_fraction)?;
    let mut out = DePeriods { phi1: [cx(0.0); 3], phi2: [cx(0.0); 3] };
    for (k, circ) in circles.iter().enumerate() {
        out.phi1[k] = circle_integral(&f1, circ, &cfg.quad)?;
        out.phi2[k] = circle_integral(&f2, circ, &cfg.quad)?;
    }
    Ok(out)
}

/// Full complex ratio differences before reduction.
pub fn de_residual_complex(a: f64, b: f64, alpha: f64, cfg: &PeriodConfig) -> Result<[Complex64; 2], PeriodError> {
    Ok(de_periods(a, b, alpha, cfg)?.ratio_differences())
}

pub fn de_residual(a: f64, b: f64, alpha: f64) -> Result<PeriodResidual, PeriodError> {
    de_residual_with(a, b, alpha, &PeriodConfig::default())
}

pub fn de_residual_with(a: f64, b: f64, alpha: f64, cfg: &PeriodConfig) -> Result<PeriodResidual, PeriodError> {
    let p = de_residual_complex(a, b, alpha, cfg)?;
    let rot = Complex64::from_polar(1.0, PI * alpha);
    Ok(PeriodResidual::new([(rot * p[0]).re, (rot * p[1]).re]))
}

/// `|rho I(phi1) - conj(I(phi2)) / rho|` on every circle, original and mirrored.
pub fn de_closing_defects(params: &DeParams, cfg: &PeriodConfig) -> Result<Vec<(String, f64)>, PeriodError> {
    params.validate()?;
    let (f1, f2, _) = de_forms(params.a, params.b, params.alpha)?;
    let mut out = Vec::new();
    let own = de_circles(params.a, params.b, cfg.radius_fraction)?;
    let mirrored = de_mirror_circles(params.a, params.b, cfg.radius_fraction)?;
    for circ in own.iter().chain(mirrored.iter()) {
        let p1 = circle_integral(&f1, circ, &cfg.quad)?;
        let p2 = circle_integral(&f2, circ, &cfg.quad)?;
        let defect = (p1 * params.rho - p2.conj() / params.rho).norm();
        out.push((circ.label.clone(), defect));
    }
    Ok(out)
}

/// Closed-form residual at `alpha = 0`.
pub fn de_residual_limit(a: f64, b: f64) -> [f64; 2] {
    let (a2, b2) = (a * a, b * b);
    [1.0 + 2.0 * b2 / ((a2 - 1.0) * (a2 - b2)), -1.0 + (a2 - 1.0) / (b2 - a2)]
}

/// Partial derivatives `[[dr1/da, dr1/db], [dr2/da, dr2/db]]` of [`de_residual_limit`].
pub fn de_residual_limit_partials(a: f64, b: f64) -> [[f64; 2]; 2] {
    let (a2, b2) = (a * a, b * b);
    let d = (a2 - 1.0) * (a2 - b2);
    let dd_a = 2.0 * a * (2.0 * a2 - b2 - 1.0);
    let dd_b = -2.0 * b * (a2 - 1.0);
    let s = (b2 - a2) * (b2 - a2);
    [
        [-2.0 * b2 * dd_a / (d * d), 4.0 * b / d - 2.0 * b2 * dd_b / (d * d)],
        [2.0 * a * (b2 - 1.0) / s, -2.0 * b * (a2 - 1.0) / s],
    ]
}

/// The stated Jacobian determinant `8ab(b^2+1) / ((a^2-1)(b^2-a^2)^3)` of the
/// `alpha = 0` residual. Differentiating the closed form gives the negative of
/// this value; see [`de_residual_limit_partials`].
pub fn de_jacobian_limit(a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    8.0 * a * b * (b2 + 1.0) / ((a2 - 1.0) * (b2 - a2).powi(3))
}

/// The exact `alpha = 0` root `(sqrt(3 + sqrt 6), sqrt 2 + sqrt 3)`.
pub fn de_limit_root() -> (f64, f64) {
    ((3.0 + 6f64.sqrt()).sqrt(), 2f64.sqrt() + 3f64.sqrt())
}

pub fn de_data(params: &DeParams) -> Result<WeierstrassData, PeriodError> {
    params.validate()?;
    let (f1, f2, dh) = de_forms(params.a, params.b, params.alpha)?;
    Ok(WeierstrassData::half_plane(f1, f2, dh, params.rho))
}

// ---------------------------------------------------------------------------
// DCCW: dihedralized Costa-Wohlgemuth with catenoidal ends

/// `(phi1, phi2, dh)` with `G dh = phi1`, `dh / G = phi2`, normalized positive at 0.
pub fn dccw_forms(
    a: f64,
    b: f64,
    c: f64,
    alpha: f64,
) -> Result<(HalfPlaneForm, HalfPlaneForm, HalfPlaneForm), PeriodError> {
    DccwParams { a, b, c, alpha }.validate()?;
    let (m, p) = (alpha - 1.0, -alpha - 1.0);
    let f1 = vec![(-c, m), (-b, 2.0), (-a, p), (-1.0, m), (1.0, -m), (a, m), (c, p)];
    let f2 = vec![(-c, p), (-a, m), (-1.0, -m), (1.0, m), (a, p), (b, 2.0), (c, m)];
    let dh = vec![(b, 1.0), (-b, 1.0), (a, -1.0), (-a, -1.0), (-c, -1.0), (c, -1.0)];
    let iv = (-1.0, 1.0);
    Ok((HalfPlaneForm::new(f1, 1.0, iv)?, HalfPlaneForm::new(f2, 1.0, iv)?, HalfPlaneForm::new(dh, 1.0, iv)?))
}

/// The circles `gamma_{1,a}` and `gamma_{a,c}`.
pub fn dccw_circles(a: f64, c: f64, fraction: f64) -> Result<[ContourCircle; 2], PeriodError> {
    Ok([contour_circle(1.0, a, -1.0, c, fraction)?, contour_circle(a, c, 1.0, f64::INFINITY, fraction)?])
}

/// `int G dh - conj int dh / G` over `gamma_{1,a}` and `gamma_{a,c}`.
pub fn dccw_residual_complex(
    a: f64,
    b: f64,
    c: f64,
    alpha: f64,
    cfg: &PeriodConfig,
) -> Result<[Complex64; 2], PeriodError> {
    let (f1, f2, _) = dccw_forms(a, b, c, alpha)?;
    let circles = dccw_circles(a, c, cfg.radius_fraction)?;
    let mut out = [cx(0.0); 2];
    for (k, circ) in circles.iter().enumerate() {
        out[k] = circle_integral(&f1, circ, &cfg.quad)? - circle_integral(&f2, circ, &cfg.quad)?.conj();
    }
    Ok(out)
}

pub fn dccw_residual(a: f64, b: f64, c: f64, alpha: f64) -> Result<PeriodResidual, PeriodError> {
    dccw_residual_with(a, b, c, alpha, &PeriodConfig::default())
}

pub fn dccw_residual_with(a: f64, b: f64, c: f64, alpha: f64, cfg: &PeriodConfig) -> Result<PeriodResidual, PeriodError> {
    let p = dccw_residual_complex(a, b, c, alpha, cfg)?;
    let norm = Complex64::new(0.0, -2.0 * PI);
    let rot = Complex64::from_polar(1.0, -PI * alpha);
    Ok(PeriodResidual::new([(p[0] / norm).re, (rot * p[1] / norm).re]))
}

/// One term `coef * prod factor^power` with the gradient of each factor in `(a, b, c)`.
struct ProductTerm {
    coef: f64,
    factors: Vec<(f64, [f64; 3], i32)>,
}

impl ProductTerm {
    fn value(&self) -> f64 {
        self.factors.iter().fold(self.coef, |v, &(f, _, p)| v * f.powi(p))
    }

    /// Logarithmic differentiation.
    fn gradient(&self) -> [f64; 3] {
        let v = self.value();
        let mut g = [0.0; 3];
        for &(f, df, p) in &self.factors {
            for k in 0..3 {
                g[k] += v * p as f64 * df[k] / f;
            }
        }
        g
    }
}

fn dccw_limit_terms(a: f64, b: f64, c: f64) -> [Vec<ProductTerm>; 2] {
    let t = |coef, factors| ProductTerm { coef, factors };
    // shared pieces
    let ca = (c * c - a * a, [-2.0 * a, 0.0, 2.0 * c]);
    let ac = (a * a - c * c, [2.0 * a, 0.0, -2.0 * c]);
    let t1 = || {
        t(
            0.5,
            vec![
                (a + b, [1.0, 1.0, 0.0], 2),
                (1.0 - a, [-1.0, 0.0, 0.0], 1),
                (a + 1.0, [1.0, 0.0, 0.0], -1),
                (ca.0, ca.1, -1),
                (a, [1.0, 0.0, 0.0], -1),
            ],
        )
    };
    let t3 = || {
        t(
            0.5,
            vec![
                (b - a, [-1.0, 1.0, 0.0], 2),
                (a + 1.0, [1.0, 0.0, 0.0], 1),
                (1.0 - a, [-1.0, 0.0, 0.0], -1),
                (ca.0, ca.1, -1),
                (a, [1.0, 0.0, 0.0], -1),
            ],
        )
    };
    let t2 = t(
        2.0,
        vec![(b - 1.0, [0.0, 1.0, 0.0], 2), (c * c - 1.0, [0.0, 0.0, 2.0 * c], -1), (a * a - 1.0, [2.0 * a, 0.0, 0.0], -1)],
    );
    let t4 = t(
        0.5,
        vec![
            (c + b, [0.0, 1.0, 1.0], 2),
            (1.0 - c, [0.0, 0.0, -1.0], 1),
            (c + 1.0, [0.0, 0.0, 1.0], -1),
            (c, [0.0, 0.0, 1.0], -1),
            (ac.0, ac.1, -1),
        ],
    );
    let t5 = t(
        0.5,
        vec![
            (b - c, [0.0, 1.0, -1.0], 2),
            (c + 1.0, [0.0, 0.0, 1.0], 1),
            (1.0 - c, [0.0, 0.0, -1.0], -1),
            (c, [0.0, 0.0, 1.0], -1),
            (ac.0, ac.1, -1),
        ],
    );
    [vec![t1(), t2, t3()], vec![t1(), t4, t3(), t5]]
}

/// Residue-theorem value of the reduced DCCW residual at `alpha = 0`.
pub fn dccw_residual_limit(a: f64, b: f64, c: f64) -> [f64; 2] {
    let terms = dccw_limit_terms(a, b, c);
    [terms[0].iter().map(ProductTerm::value).sum(), terms[1].iter().map(ProductTerm::value).sum()]
}

/// Gradients of the two components of [`dccw_residual_limit`] in `(a, b, c)`.
pub fn dccw_residual_limit_partials(a: f64, b: f64, c: f64) -> [[f64; 3]; 2] {
    let terms = dccw_limit_terms(a, b, c);
    let mut out = [[0.0; 3]; 2];
    for (row, ts) in out.iter_mut().zip(terms.iter()) {
        for t in ts {
            let g = t.gradient();
            for k in 0..3 {
                row[k] += g[k];
            }
        }
    }
    out
}

/// Determinant of the Jacobian of `(a, b) -> dccw_residual_limit(a, b, b^2 / a)`.
pub fn dccw_jacobian_limit(a: f64, b: f64) -> f64 {
    let g = dccw_residual_limit_partials(a, b, b * b / a);
    let (dc_da, dc_db) = (-b * b / (a * a), 2.0 * b / a);
    let j = |r: usize| [g[r][0] + g[r][2] * dc_da, g[r][1] + g[r][2] * dc_db];
    let (r1, r2) = (j(0), j(1));
    r1[0] * r2[1] - r1[1] * r2[0]
}

/// The `alpha = 0` root `(-3 sqrt 2 + 3 sqrt 3 + 2 sqrt 6 - 4, 2 sqrt 2 + 3)` with `c = b^2 / a`.
pub fn dccw_limit_root() -> DccwParams {
    let (s2, s3, s6) = (2f64.sqrt(), 3f64.sqrt(), 6f64.sqrt());
    DccwParams::equal_growth(-3.0 * s2 + 3.0 * s3 + 2.0 * s6 - 4.0, 2.0 * s2 + 3.0, 0.0)
}

pub fn dccw_data(params: &DccwParams) -> Result<WeierstrassData, PeriodError> {
    let (f1, f2, dh) = dccw_forms(params.a, params.b, params.c, params.alpha)?;
    Ok(WeierstrassData::half_plane(f1, f2, dh, 1.0))
}

// ---------------------------------------------------------------------------
// DKS: dihedralized Karcher-Scherk on a rectangular torus

/// `(G, dh)` on the torus.
pub fn dks_forms(params: &DksParams) -> Result<(TorusForm, TorusForm), PeriodError> {
    params.validate()?;
    let t2 = params.tau.tau() * 0.5;
    let b = params.b();
    let ic = Complex64::new(0.0, params.c);
    let bracket = ThetaBracket { zero: 0.5 + params.a, pole: 0.5 - params.a, power: 1.0 - params.alpha };
    let g = TorusForm::new(
        vec![(t2 - b, 1), (t2 + b, -1)],
        Complex64::from_polar(1.0, -2.0 * PI * b),
        Some(bracket),
        params.tau,
    );
    let dh = TorusForm::new(vec![(t2 + b, 1), (t2 - b, 1), (t2 - ic, -1), (t2 + ic, -1)], cx(1.0), None, params.tau);
    Ok((g, dh))
}

pub fn dks_data(params: &DksParams) -> Result<WeierstrassData, PeriodError> {
    let (g, dh) = dks_forms(params)?;
    Ok(WeierstrassData::torus(g, dh))
}

/// `(int_{du} dh, int_{dr} G dh - conj int_{dr} dh / G)` with `du = tau/2 + [0, 1/2]`
/// and `dr = 1/2 + [0, tau/2]`.
pub fn dks_residual_complex(params: &DksParams, cfg: &PeriodConfig) -> Result<[Complex64; 2], PeriodError> {
    Ok(dks_periods(params, cfg)?.0)
}

/// The two period conditions and `int_{dr} dh`, the height of the right edge.
fn dks_periods(params: &DksParams, cfg: &PeriodConfig) -> Result<([Complex64; 2], Complex64), PeriodError> {
    let data = dks_data(params)?;
    let t2 = params.tau.tau() * 0.5;
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let upper = PathSegment::line(t2, t2 + 0.5);
    let p1 = integrate_along(|z| data.values(z).map(|v| v[2]).unwrap_or(nan), &upper, &cfg.quad)
        .map_err(|source| PeriodError::Quadrature { contour: "upper edge".into(), source })?;
    let right = PathSegment::line(cx(0.5), t2 + 0.5);
    let p2 = integrate_along(|z| data.values(z).unwrap_or([nan; 3]), &right, &cfg.quad)
        .map_err(|source| PeriodError::Quadrature { contour: "right edge".into(), source })?;
    let v = p2.value;
    Ok(([p1.value, v[0] - v[1].conj()], v[2]))
}

fn reduce_dks(p: [Complex64; 2], alpha: f64) -> [f64; 2] {
    let rot = Complex64::from_polar(1.0, PI * alpha);
    [p[0].re, (rot * p[1]).im]
}

/// DKS residual divided by the height of the right edge. Same zeros as
/// [`dks_residual`], but it stays away from zero as `a, c -> 1/2` where the
/// unscaled residual degenerates; Newton iterates on this one.
pub fn dks_residual_scaled(params: &DksParams, cfg: &PeriodConfig) -> Result<PeriodResidual, PeriodError> {
    let (p, height) = dks_periods(params, cfg)?;
    let r = reduce_dks(p, params.alpha);
    let h = height.norm();
    Ok(PeriodResidual::new([r[0] / h, r[1] / h]))
}

pub fn dks_residual(a: f64, c: f64, tau: TorusModulus, alpha: f64) -> Result<PeriodResidual, PeriodError> {
    dks_residual_with(&DksParams { a, c, tau, alpha }, &PeriodConfig::default())
}

pub fn dks_residual_with(params: &DksParams, cfg: &PeriodConfig) -> Result<PeriodResidual, PeriodError> {
    Ok(PeriodResidual::new(reduce_dks(dks_residual_complex(params, cfg)?, params.alpha)))
}

// ---------------------------------------------------------------------------
// Half-plane model of the alpha = 0, tau = i torus problem

fn check_unit(name: &str, x: f64) -> Result<(), PeriodError> {
    if x > -1.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} outside (-1, 1)")))
    }
}

/// `rho(x) = sqrt(x) / sqrt(1 - x^2)`.
pub fn rho_tilde(x: f64) -> f64 {
    x.sqrt() / (1.0 - x * x).sqrt()
}

const HALFLINE_TOL: f64 = 1e-13;

/// `int_1^inf g(t) (t - 1)^{e} dt` for a real integrand.
fn halfline(g: impl Fn(f64) -> f64, exp_start: f64, decay: f64, label: &str) -> Result<f64, PeriodError> {
    integrate_halfline(|t| cx(g(t)), 1.0, exp_start, decay, HALFLINE_TOL)
        .map(|r| r.value.re)
        .map_err(|source| PeriodError::Quadrature { contour: label.into(), source })
}

/// `psi1(x, y) = int_1^inf sqrt(t^2 - 1) / (sqrt(t) (t + x)(t - y)) dt`.
pub fn psi1(x: f64, y: f64) -> Result<f64, PeriodError> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    halfline(|t| (t + 1.0).sqrt() / (t.sqrt() * (t + x) * (t - y)), 0.5, -1.5, "psi1")
}

/// `psi2(x, y) = int_1^inf sqrt(t) / (sqrt(t^2 - 1)(t + x)(t - y)) dt`.
pub fn psi2(x: f64, y: f64) -> Result<f64, PeriodError> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    halfline(|t| t.sqrt() / ((t + 1.0).sqrt() * (t + x) * (t - y)), -0.5, -2.5, "psi2")
}

/// `[[d psi1/dx, d psi1/dy], [d psi2/dx, d psi2/dy]]`.
pub fn psi_partials(x: f64, y: f64) -> Result<[[f64; 2]; 2], PeriodError> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    let k1 = |t: f64| (t + 1.0).sqrt() / t.sqrt();
    let k2 = |t: f64| t.sqrt() / (t + 1.0).sqrt();
    Ok([
        [
            -halfline(|t| k1(t) / ((t + x).powi(2) * (t - y)), 0.5, -2.5, "d psi1/dx")?,
            halfline(|t| k1(t) / ((t + x) * (t - y).powi(2)), 0.5, -2.5, "d psi1/dy")?,
        ],
        [
            -halfline(|t| k2(t) / ((t + x).powi(2) * (t - y)), -0.5, -3.5, "d psi2/dx")?,
            halfline(|t| k2(t) / ((t + x) * (t - y).powi(2)), -0.5, -3.5, "d psi2/dy")?,
        ],
    ])
}

/// Real-reduced `(rho psi1(x,y) - psi2(x,y)/rho, rho psi1(-x,-y) - psi2(-x,-y)/rho)`
/// with `rho = rho_tilde(x)`. The second component of the complex map is `i`
/// times the second entry; see [`tilde_p_complex`].
pub fn tilde_p(x: f64, y: f64) -> Result<[f64; 2], PeriodError> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(invalid(format!("tildeP needs x, y in (0, 1), got ({x}, {y})")));
    }
    let r = rho_tilde(x);
    Ok([r * psi1(x, y)? - psi2(x, y)? / r, r * psi1(-x, -y)? - psi2(-x, -y)? / r])
}

pub fn tilde_p_complex(x: f64, y: f64) -> Result<[Complex64; 2], PeriodError> {
    let [p1, p2] = tilde_p(x, y)?;
    Ok([cx(p1), Complex64::new(0.0, p2)])
}

/// Jacobian of [`tilde_p`] from the analytic partials of `psi1`, `psi2` and `rho`.
pub fn tilde_p_jacobian(x: f64, y: f64) -> Result<[[f64; 2]; 2], PeriodError> {
    let r = rho_tilde(x);
    let dr = r * (0.5 / x + x / (1.0 - x * x));
    let row = |s: f64| -> Result<[f64; 2], PeriodError> {
        let (p1, p2) = (psi1(s * x, s * y)?, psi2(s * x, s * y)?);
        let d = psi_partials(s * x, s * y)?;
        Ok([
            dr * p1 + r * s * d[0][0] + p2 * dr / (r * r) - s * d[1][0] / r,
            r * s * d[0][1] - s * d[1][1] / r,
        ])
    };
    Ok([row(1.0)?, row(-1.0)?])
}

/// `f1(a) = 2/(a^2 - 1) int_1^inf sqrt(t)(1 - t a) / (sqrt(t^2 - 1)(t - a)^2 (t + a)) dt`.
pub fn f1(at: f64) -> Result<f64, PeriodError> {
    if !(at > 0.0 && at < 1.0) {
        return Err(invalid(format!("f1 needs a in (0, 1), got {at}")));
    }
    let i = halfline(
        |t| t.sqrt() * (1.0 - t * at) / ((t + 1.0).sqrt() * (t - at).powi(2) * (t + at)),
        -0.5,
        -2.5,
        "f1",
    )?;
    Ok(2.0 / (at * at - 1.0) * i)
}

/// The second factor of the torus Jacobian determinant at the diagonal.
pub fn f2(at: f64) -> Result<f64, PeriodError> {
    if !(at > 0.0 && at < 1.0) {
        return Err(invalid(format!("f2 needs a in (0, 1), got {at}")));
    }
    let a2 = at * at;
    let den = 2.0 * at.sqrt() * (1.0 - a2).powf(2.5);
    halfline(
        |t| {
            let num = t * t * (a2 * at + at) + t * (-3.0 * a2 * a2 - 2.0 * a2 + 1.0) + at * (5.0 * a2 - 3.0);
            num / (den * t.sqrt() * (t + 1.0).sqrt() * (t - at).powi(2))
        },
        -0.5,
        -1.5,
        "f2",
    )
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `rho(a)^2 psi1(a, a) - psi2(a, a)` on `(0, 1)`, by bisection to
/// `1e-12`; computed once.
pub fn a0_tilde() -> f64 {
    static A0: OnceLock<f64> = OnceLock::new();
    *A0.get_or_init(|| {
        let g = |a: f64| {
            let r = rho_tilde(a);
            r * r * psi1(a, a).expect("a in (0,1)") - psi2(a, a).expect("a in (0,1)")
        };
        bisect(g, 0.05, 0.95, 1e-12)
    })
}

/// The torus root `a = c = 1/2 - T(a0_tilde)` at `alpha = 0`, `tau = i`.
pub fn a0_torus() -> f64 {
    static A0: OnceLock<f64> = OnceLock::new();
    *A0.get_or_init(|| 0.5 - t_map(cx(a0_tilde())).expect("real point in [0, 1]").re)
}

fn sc_form() -> &'static HalfPlaneForm {
    static F: OnceLock<HalfPlaneForm> = OnceLock::new();
    F.get_or_init(|| {
        HalfPlaneForm::new(vec![(0.0, -0.5), (1.0, -0.5), (-1.0, -0.5)], 1.0, (0.0, 1.0)).expect("fixed factors")
    })
}

/// `2 int_0^1 dw / sqrt(w (1 - w^2)) = B(1/4, 1/2)`.
fn sc_norm() -> f64 {
    gamma(0.25) * gamma(0.5) / gamma(0.75)
}

/// Schwarz-Christoffel map of the upper half-plane onto the square
/// `[0, 1/2] x [0, 1/2]`, sending `-1, 0, 1` to `i/2, 0, 1/2`.
pub fn t_map(z: Complex64) -> Result<Complex64, PeriodError> {
    if z.im < 0.0 || !(z.re.is_finite() && z.im.is_finite()) {
        return Err(invalid(format!("T needs z in the closed upper half-plane, got {z}")));
    }
    if z.norm() == 0.0 {
        return Ok(cx(0.0));
    }
    let form = sc_form();
    // split at +-1 when the straight path runs through them
    let mut stops = vec![cx(0.0)];
    if z.im == 0.0 && z.re.abs() > 1.0 {
        stops.push(cx(z.re.signum()));
    }
    stops.push(z);
    let mut total = cx(0.0);
    for w in stops.windows(2) {
        let weight = |p: Complex64| if p.im == 0.0 && (p.re == 0.0 || p.re.abs() == 1.0) { -0.5 } else { 0.0 };
        let (es, ee) = (weight(w[0]), weight(w[1]));
        let seg = PathSegment::Line { start: w[0], end: w[1], exp_start: es, exp_end: ee };
        let (s, e) = (w[0], w[1]);
        let r = integrate_along(
            |p| {
                let v = form.eval_upper(p).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                v / ((p - s).norm().powf(es) * (e - p).norm().powf(ee))
            },
            &seg,
            &QuadratureConfig::with_tol(1e-14),
        )
        .map_err(|source| PeriodError::Quadrature { contour: "T path".into(), source })?;
        total += r.value;
    }
    Ok(total / sc_norm())
}

fn t_map_real_unit(x: f64) -> f64 {
    t_map(cx(x)).map(|v| v.re).unwrap_or(f64::NAN)
}

/// Inverse of [`t_map`] on the closed square `[0, 1/2] x [0, 1/2]`.
pub fn t_inverse(w: Complex64) -> Result<Complex64, PeriodError> {
    let eps = 1e-15;
    if !(w.re >= -eps && w.re <= 0.5 + eps && w.im >= -eps && w.im <= 0.5 + eps) {
        return Err(invalid(format!("T^-1 needs w in [0, 1/2] x [0, 1/2], got {w}")));
    }
    let (u, v) = (w.re.clamp(0.0, 0.5), w.im.clamp(0.0, 0.5));
    // edges: T(-x) = i T(x) for x in [0, 1]
    if v <= eps {
        return Ok(cx(bisect(|x| t_map_real_unit(x) - u, 0.0, 1.0, 1e-15)));
    }
    if u <= eps {
        return Ok(cx(-bisect(|x| t_map_real_unit(x) - v, 0.0, 1.0, 1e-15)));
    }
    if (u - 0.5).abs() <= eps || (v - 0.5).abs() <= eps {
        // right and top edges: real z with |z| >= 1, |T| monotone in |z|
        let right = (u - 0.5).abs() <= eps;
        let target = if right { v } else { u };
        let sign = if right { 1.0 } else { -1.0 };
        let g = |s: f64| {
            // z = sign / s, s in (0, 1]
            let t = t_map(cx(sign / s)).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            (if right { t.im } else { t.re }) - target
        };
        if target >= 0.5 - eps {
            return Err(invalid("the corner (1 + i)/2 is the image of infinity"));
        }
        return Ok(cx(sign / bisect(|s| -g(s), 1e-12, 1.0, 1e-15)));
    }
    let k = sc_norm();
    let mut z = Complex64::new(0.0, 1.0);
    for _ in 0..100 {
        let t = t_map(z)?;
        let d = t - w;
        if d.norm() < 1e-14 {
            return Ok(z);
        }
        let deriv = sc_form().eval_upper(z)? / k;
        let mut step = d / deriv;
        while (z - step).im < 0.0 {
            step *= 0.5;
        }
        z -= step;
    }
    Err(invalid(format!("T^-1 did not converge at {w}")))
}

// ---------------------------------------------------------------------------
// Solver

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub tol: f64,
    /// Relative finite-difference step `h = fd_step * (1 + |x|)`.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 40, max_halvings: 30, tol: SOLVE_TOL, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub x: [f64; 2],
    pub residual: PeriodResidual,
    pub iterations: usize,
}

/// Central finite-difference Jacobian.
pub fn fd_jacobian<F>(f: &F, x: [f64; 2], rel_step: f64) -> Result<[[f64; 2]; 2], PeriodError>
where
    F: Fn([f64; 2]) -> Result<[f64; 2], PeriodError>,
{
    let mut j = [[0.0; 2]; 2];
    for k in 0..2 {
        let h = rel_step * (1.0 + x[k].abs());
        let (mut xp, mut xm) = (x, x);
        xp[k] += h;
        xm[k] -= h;
        // one-sided near the edge of the parameter domain
        let (fp, fm, width) = match (f(xp), f(xm)) {
            (Ok(p), Ok(m)) => (p, m, 2.0 * h),
            (Ok(p), Err(_)) => (p, f(x)?, h),
            (Err(_), Ok(m)) => (f(x)?, m, h),
            (Err(e), Err(_)) => return Err(e),
        };
        for r in 0..2 {
            j[r][k] = (fp[r] - fm[r]) / width;
        }
    }
    Ok(j)
}

/// Damped Newton: full step, halved until the residual norm decreases.
pub fn damped_newton<F>(f: F, x0: [f64; 2], opts: &NewtonOptions) -> Result<NewtonOutcome, PeriodError>
where
    F: Fn([f64; 2]) -> Result<[f64; 2], PeriodError>,
{
    let mut x = x0;
    let mut r = PeriodResidual::new(f(x)?);
    let mut iterations = 0;
    // keep polishing below the acceptance threshold while it still pays off
    let polish = opts.tol * 1e-4;
    while iterations < opts.max_iterations && r.norm > polish {
        iterations += 1;
        let j = fd_jacobian(&f, x, opts.fd_step)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let fro = (j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2)).sqrt();
        let condition = if det == 0.0 { f64::INFINITY } else { fro * fro / det.abs() };
        if !(condition < 1e12) {
            return Err(PeriodError::SingularJacobian { at: x, condition });
        }
        let dx = [
            -(j[1][1] * r.r[0] - j[0][1] * r.r[1]) / det,
            -(-j[1][0] * r.r[0] + j[0][0] * r.r[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Ok(v) = f(trial) {
                let tr = PeriodResidual::new(v);
                if tr.norm < r.norm {
                    accepted = Some((trial, tr));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((nx, nr)) => {
                x = nx;
                r = nr;
            }
            None => break,
        }
    }
    if r.norm < opts.tol {
        Ok(NewtonOutcome { x, residual: r, iterations })
    } else {
        Err(PeriodError::Diverged { last: x, norm: r.norm })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    De,
    Dccw,
    Dks,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::De => "de",
            Family::Dccw => "dccw",
            Family::Dks => "dks",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = PeriodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "de" => Ok(Family::De),
            "dccw" => Ok(Family::Dccw),
            "dks" => Ok(Family::Dks),
            other => Err(invalid(format!("unknown family '{other}' (expected de, dccw or dks)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyParams {
    De(DeParams),
    Dccw(DccwParams),
    Dks(DksParams),
}

impl FamilyParams {
    pub fn family(&self) -> Family {
        match self {
            FamilyParams::De(_) => Family::De,
            FamilyParams::Dccw(_) => Family::Dccw,
            FamilyParams::Dks(_) => Family::Dks,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            FamilyParams::De(p) => p.alpha,
            FamilyParams::Dccw(p) => p.alpha,
            FamilyParams::Dks(p) => p.alpha,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut out = *self;
        match &mut out {
            FamilyParams::De(p) => p.alpha = alpha,
            FamilyParams::Dccw(p) => p.alpha = alpha,
            FamilyParams::Dks(p) => p.alpha = alpha,
        }
        out
    }

    /// The two unknowns of the period problem: `(a, b)` for DE and DCCW, `(a, c)` for DKS.
    pub fn unknowns(&self) -> [f64; 2] {
        match self {
            FamilyParams::De(p) => [p.a, p.b],
            FamilyParams::Dccw(p) => [p.a, p.b],
            FamilyParams::Dks(p) => [p.a, p.c],
        }
    }

    /// Same family and `alpha` with the two solver unknowns replaced; DCCW
    /// recomputes `c = b^2 / a` when `equal_growth` is set.
    pub fn with_unknowns(&self, x: [f64; 2], equal_growth: bool) -> Self {
        match *self {
            FamilyParams::De(p) => FamilyParams::De(DeParams { a: x[0], b: x[1], ..p }),
            FamilyParams::Dccw(p) => {
                let c = if equal_growth { x[1] * x[1] / x[0] } else { p.c };
                FamilyParams::Dccw(DccwParams { a: x[0], b: x[1], c, alpha: p.alpha })
            }
            FamilyParams::Dks(p) => FamilyParams::Dks(DksParams { a: x[0], c: x[1], ..p }),
        }
    }

    pub fn validate(&self) -> Result<(), PeriodError> {
        match self {
            FamilyParams::De(p) => p.validate(),
            FamilyParams::Dccw(p) => p.validate(),
            FamilyParams::Dks(p) => p.validate(),
        }
    }

    /// Reduced residual at these parameters.
    pub fn residual(&self, cfg: &PeriodConfig) -> Result<PeriodResidual, PeriodError> {
        match self {
            FamilyParams::De(p) => de_residual_with(p.a, p.b, p.alpha, cfg),
            FamilyParams::Dccw(p) => dccw_residual_with(p.a, p.b, p.c, p.alpha, cfg),
            FamilyParams::Dks(p) => dks_residual_with(p, cfg),
        }
    }

    /// Residual Newton iterates on; differs from [`FamilyParams::residual`]
    /// only by a positive scale.
    pub fn solver_residual(&self, cfg: &PeriodConfig) -> Result<PeriodResidual, PeriodError> {
        match self {
            FamilyParams::Dks(p) => dks_residual_scaled(p, cfg),
            other => other.residual(cfg),
        }
    }

    pub fn weierstrass_data(&self) -> Result<WeierstrassData, PeriodError> {
        match self {
            FamilyParams::De(p) => de_data(p),
            FamilyParams::Dccw(p) => dccw_data(p),
            FamilyParams::Dks(p) => dks_data(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub newton: NewtonOptions,
    pub period: PeriodConfig,
    /// DCCW only: eliminate `c = b^2 / a`. Otherwise `c` stays at its initial value.
    pub dccw_equal_growth: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), period: PeriodConfig::default(), dccw_equal_growth: true }
    }
}

/// Where a record sits in a continuation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationStep {
    /// Index of the scheduled target this record leads to.
    pub index: usize,
    /// Continued parameter: `alpha`, or `Im tau` for a modulus sweep.
    pub parameter: f64,
    /// Number of bisections needed to reach this point.
    pub depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionRecord {
    pub params: FamilyParams,
    pub residual: PeriodResidual,
    pub iterations: usize,
    pub solved: bool,
    pub step: Option<ContinuationStep>,
}

impl SolutionRecord {
    pub fn family(&self) -> Family {
        self.params.family()
    }
}

/// Damped Newton on the family residual, starting from `init` with `alpha`
/// (and `tau` for DKS) replaced by the given values.
pub fn solve_family(
    family: Family,
    alpha: f64,
    tau: Option<TorusModulus>,
    init: &FamilyParams,
    opts: &SolveOptions,
) -> Result<SolutionRecord, PeriodError> {
    if init.family() != family {
        return Err(invalid(format!("initial parameters belong to {}, not {family}", init.family())));
    }
    let mut start = init.with_alpha(alpha);
    match (&mut start, tau) {
        (FamilyParams::Dks(p), Some(t)) => p.tau = t,
        (FamilyParams::Dks(_), None) => {}
        (_, Some(_)) => return Err(invalid(format!("{family} does not take a modulus"))),
        _ => {}
    }
    if let FamilyParams::Dccw(p) = &mut start {
        if opts.dccw_equal_growth {
            p.c = p.b * p.b / p.a;
        }
    }
    start.validate()?;
    let eq = opts.dccw_equal_growth;
    let f = |x: [f64; 2]| -> Result<[f64; 2], PeriodError> {
        let p = start.with_unknowns(x, eq);
        p.validate()?;
        Ok(p.solver_residual(&opts.period)?.r)
    };
    let out = damped_newton(f, start.unknowns(), &opts.newton)?;
    let mut params = start.with_unknowns(out.x, eq);
    let residual = params.residual(&opts.period)?;
    if !(residual.norm < opts.newton.tol) {
        return Err(PeriodError::Diverged { last: out.x, norm: residual.norm });
    }
    if let FamilyParams::De(p) = &mut params {
        p.rho = de_periods(p.a, p.b, p.alpha, &opts.period)?.rho()?;
    }
    Ok(SolutionRecord { params, residual, iterations: out.iterations, solved: true, step: None })
}

/// Records reached by a continuation run, and why it stopped early if it did.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationResult {
    pub records: Vec<SolutionRecord>,
    /// First scheduled value that could not be reached, with the last error.
    pub failure: Option<(f64, PeriodError)>,
}

impl ContinuationResult {
    /// Largest (last) parameter value reached.
    pub fn last_solved(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.step.map(|s| s.parameter))
    }
}

const MAX_BISECTIONS: u32 = 4;

fn advance<S>(
    from: &SolutionRecord,
    from_value: f64,
    target: f64,
    index: usize,
    depth: u32,
    solve: &S,
) -> Result<Vec<SolutionRecord>, PeriodError>
where
    S: Fn(&FamilyParams, f64) -> Result<SolutionRecord, PeriodError>,
{
    match solve(&from.params, target) {
        Ok(mut rec) => {
            rec.step = Some(ContinuationStep { index, parameter: target, depth });
            Ok(vec![rec])
        }
        Err(e) if depth >= MAX_BISECTIONS => Err(e),
        Err(_) => {
            let mid = 0.5 * (from_value + target);
            let mut first = advance(from, from_value, mid, index, depth + 1, solve)?;
            let last = *first.last().expect("non-empty on success");
            first.extend(advance(&last, mid, target, index, depth + 1, solve)?);
            Ok(first)
        }
    }
}

fn march<S>(start: SolutionRecord, start_value: f64, targets: &[(usize, f64)], solve: &S) -> ContinuationResult
where
    S: Fn(&FamilyParams, f64) -> Result<SolutionRecord, PeriodError>,
{
    let mut records = vec![start];
    let (mut prev, mut prev_value) = (start, start_value);
    for &(index, target) in targets {
        match advance(&prev, prev_value, target, index, 0, solve) {
            Ok(recs) => {
                prev = *recs.last().expect("non-empty on success");
                prev_value = target;
                records.extend(recs);
            }
            Err(e) => return ContinuationResult { records, failure: Some((target, e)) },
        }
    }
    ContinuationResult { records, failure: None }
}

/// Continuation in `alpha` along an increasing schedule starting at 0. Each
/// step warm-starts from the previous solution; a failed step is bisected up
/// to four times before the branch is truncated.
pub fn continuation(
    family: Family,
    alpha_schedule: &[f64],
    tau: Option<TorusModulus>,
    init: &FamilyParams,
    opts: &SolveOptions,
) -> Result<ContinuationResult, PeriodError> {
    if alpha_schedule.first() != Some(&0.0) {
        return Err(invalid("alpha schedule must start at 0"));
    }
    if alpha_schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("alpha schedule must be strictly increasing"));
    }
    let mut first = solve_family(family, 0.0, tau, init, opts)?;
    first.step = Some(ContinuationStep { index: 0, parameter: 0.0, depth: 0 });
    let solve = |p: &FamilyParams, alpha: f64| solve_family(family, alpha, None, p, opts);
    let targets: Vec<(usize, f64)> = alpha_schedule.iter().copied().enumerate().skip(1).collect();
    Ok(march(first, 0.0, &targets, &solve))
}

/// DKS continuation in `Im tau` at fixed `alpha`. The branch is anchored at
/// the scheduled value closest to `init`'s modulus and swept outward in both
/// directions. Records come back sorted by `Im tau`.
pub fn tau_continuation(
    alpha: f64,
    tau_schedule: &[f64],
    init: &DksParams,
    opts: &SolveOptions,
) -> Result<ContinuationResult, PeriodError> {
    if tau_schedule.is_empty() || tau_schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("tau schedule must be a non-empty increasing list of Im tau"));
    }
    let modulus = |t: f64| TorusModulus::imaginary(t).map_err(|e| invalid(e.to_string()));
    let anchor = tau_schedule
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1 - init.tau.im()).abs().total_cmp(&(y.1 - init.tau.im()).abs()))
        .map(|(k, _)| k)
        .expect("non-empty");
    let t0 = tau_schedule[anchor];
    let mut first = solve_family(Family::Dks, alpha, Some(modulus(t0)?), &FamilyParams::Dks(*init), opts)?;
    first.step = Some(ContinuationStep { index: anchor, parameter: t0, depth: 0 });
    let solve = |p: &FamilyParams, t: f64| solve_family(Family::Dks, alpha, Some(modulus(t)?), p, opts);
    let up: Vec<(usize, f64)> = tau_schedule.iter().copied().enumerate().skip(anchor + 1).collect();
    let down: Vec<(usize, f64)> = tau_schedule.iter().copied().enumerate().take(anchor).rev().collect();
    let hi = march(first, t0, &up, &solve);
    let lo = march(first, t0, &down, &solve);
    let mut records: Vec<SolutionRecord> = lo.records.into_iter().skip(1).collect();
    records.extend(hi.records);
    records.sort_by(|x, y| {
        let p = |r: &SolutionRecord| r.step.map(|s| s.parameter).unwrap_or(f64::NAN);
        p(x).total_cmp(&p(y))
    });
    Ok(ContinuationResult { records, failure: hi.failure.or(lo.failure) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn de_limit_at_two_three() {
        let r = de_residual_limit(2.0, 3.0);
        assert!((r[0] + 0.2).abs() < 1e-15 && (r[1] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn de_limit_vanishes_at_root() {
        let (a, b) = de_limit_root();
        let r = de_residual_limit(a, b);
        assert!(r[0].abs() < 1e-14 && r[1].abs() < 1e-14, "{r:?}");
    }

    #[test]
    fn de_limit_partials_give_negated_stated_determinant() {
        let (a, b) = de_limit_root();
        let j = de_residual_limit_partials(a, b);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        assert!((det + de_jacobian_limit(a, b)).abs() < 1e-12 * det.abs());
        assert!((det + 1.63383469496824).abs() < 1e-12);
    }

    #[test]
    fn dccw_limit_matches_rational_value() {
        // exact rationals at (2, 3, 4): (-7/120, 7/80)
        let r = dccw_residual_limit(2.0, 3.0, 4.0);
        assert!((r[0] + 7.0 / 120.0).abs() < 1e-15 && (r[1] - 7.0 / 80.0).abs() < 1e-15, "{r:?}");
    }

    #[test]
    fn dccw_limit_root_and_determinant() {
        let p = dccw_limit_root();
        let r = dccw_residual_limit(p.a, p.b, p.c);
        assert!(r[0].abs() < 1e-13 && r[1].abs() < 1e-13, "{r:?}");
        assert!((dccw_jacobian_limit(p.a, p.b) - 0.000151466721187637).abs() < 1e-13);
    }

    #[test]
    fn contour_circle_bounds() {
        let c = contour_circle(1.0, 3.0, 0.0, 4.0, 0.5).unwrap();
        assert_eq!(c.center, 2.0);
        assert_eq!(c.radius, 1.5);
        let open = contour_circle(1.0, 3.0, 0.0, f64::INFINITY, 0.5).unwrap();
        assert_eq!(open.radius, 1.5);
        assert!(contour_circle(1.0, 3.0, 2.0, 4.0, 0.5).is_err());
    }

    #[test]
    fn rho_tilde_at_half() {
        assert!((rho_tilde(0.5) - 0.816496580927726).abs() < 1e-15);
    }

    #[test]
    fn family_round_trip() {
        for f in [Family::De, Family::Dccw, Family::Dks] {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("xyz".parse::<Family>().is_err());
    }

    #[test]
    fn newton_on_a_quadratic() {
        let f = |x: [f64; 2]| Ok([x[0] * x[0] - 2.0, x[1] - x[0]]);
        let out = damped_newton(f, [1.0, 0.0], &NewtonOptions::default()).unwrap();
        assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn newton_reports_singular_jacobian() {
        let f = |x: [f64; 2]| Ok([x[0] + x[1] - 1.0, 2.0 * (x[0] + x[1])]);
        let err = damped_newton(f, [0.0, 0.0], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, PeriodError::SingularJacobian { .. }));
    }
}
