//! Weierstrass data `(G, dh)` and the minimal map `f = Re int (w1, w2, w3)`.
//!
//! Half-plane forms are stored as factor lists `c * prod (z - r)^e` so that
//! orders, residues and rational limits come straight from the exponents.
//! Torus forms are products of theta factors with integer powers, optionally
//! times one fractional bracket `(theta(z - s) / theta(z - s2))^p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::periods::DccwParams;
use crate::quadrature::{integrate_along, BranchTracked, PathSegment, QuadError, QuadratureConfig};
use crate::theta::{log_theta_ratio_strip, theta, ThetaError, TorusModulus};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FormError {
    #[error("{form} has a pole at {at}")]
    Pole { form: &'static str, at: Complex64 },
    #[error("point {0} lies below the real axis; use a branch state to continue there")]
    LowerHalfPlane(Complex64),
    #[error("invalid form: {0}")]
    Invalid(String),
    #[error("exponent {0} at the requested root is not an integer")]
    NotRational(f64),
    #[error("period integrals {p1} and {p2} do not admit a positive Lopez-Ros factor")]
    PhaseMismatch { p1: Complex64, p2: Complex64 },
    #[error("path does not start at the base point {0}")]
    DisconnectedPath(Complex64),
    #[error(transparent)]
    Theta(#[from] ThetaError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Argument of `z - r` in the closed upper half-plane; on the real axis the
/// limit from above (0 right of the root, pi left of it).
fn upper_arg(z: Complex64, r: f64) -> f64 {
    if z.im > 0.0 {
        (z - r).arg()
    } else if z.re >= r {
        0.0
    } else {
        PI
    }
}

/// `prefactor * prod (z - root)^exponent` on the upper half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlaneForm {
    factors: Vec<(f64, f64)>,
    prefactor: Complex64,
    normalization_interval: (f64, f64),
    roots: Vec<Complex64>,
}

impl HalfPlaneForm {
    /// Builds `scale * e^{i phi} * prod (z - r)^e` with the constant phase
    /// `phi` chosen so that the value at the midpoint of `interval` is a
    /// positive real.
    pub fn new(factors: Vec<(f64, f64)>, scale: f64, interval: (f64, f64)) -> Result<Self, FormError> {
        if factors.iter().any(|&(r, e)| !r.is_finite() || !e.is_finite()) {
            return Err(FormError::Invalid("non-finite root or exponent".into()));
        }
        if !(interval.0 < interval.1) || !(scale > 0.0) {
            return Err(FormError::Invalid(format!("interval {interval:?} with scale {scale}")));
        }
        let mid = 0.5 * (interval.0 + interval.1);
        let mut phase = 0.0;
        for &(r, e) in &factors {
            if r == mid && e != 0.0 {
                return Err(FormError::Invalid(format!("root {r} at the normalization point")));
            }
            phase += e * upper_arg(c(mid), r);
        }
        let prefactor = Complex64::from_polar(scale, -phase);
        let roots = factors.iter().map(|&(r, _)| c(r)).collect();
        Ok(Self { factors, prefactor, normalization_interval: interval, roots })
    }

    pub fn factors(&self) -> &[(f64, f64)] {
        &self.factors
    }

    pub fn prefactor(&self) -> Complex64 {
        self.prefactor
    }

    pub fn normalization_interval(&self) -> (f64, f64) {
        self.normalization_interval
    }

    /// Roots where the form has a pole or a branch point.
    pub fn singular_roots(&self) -> impl Iterator<Item = f64> + '_ {
        self.factors.iter().filter(|f| f.1 < 0.0 || f.1 != f.1.round()).map(|f| f.0)
    }

    /// Sum of all exponents; the form behaves like `z^sum dz` at infinity.
    pub fn exponent_sum(&self) -> f64 {
        self.factors.iter().map(|f| f.1).sum()
    }

    /// Exponent attached to `root` (summed if the root is repeated).
    pub fn exponent_at(&self, root: f64) -> f64 {
        self.factors.iter().filter(|f| f.0 == root).map(|f| f.1).sum()
    }

    /// Arguments of `z - r` for every factor on the upper-half-plane branch.
    pub fn upper_args(&self, z: Complex64) -> Vec<f64> {
        self.factors.iter().map(|&(r, _)| upper_arg(z, r)).collect()
    }

    /// Value on the upper-half-plane branch (real axis: limit from above).
    pub fn eval_upper(&self, z: Complex64) -> Result<Complex64, FormError> {
        if z.im < 0.0 {
            return Err(FormError::LowerHalfPlane(z));
        }
        self.checked(z, &self.upper_args(z))
    }

    fn checked(&self, z: Complex64, args: &[f64]) -> Result<Complex64, FormError> {
        for &(r, e) in &self.factors {
            if e < 0.0 && z == c(r) {
                return Err(FormError::Pole { form: "half-plane form", at: z });
            }
        }
        Ok(self.eval_with_args(z, args))
    }

    /// Residue at a root whose exponents are all integers.
    pub fn residue(&self, root: f64) -> Result<Complex64, FormError> {
        for &(_, e) in &self.factors {
            if (e - e.round()).abs() > 1e-12 {
                return Err(FormError::NotRational(e));
            }
        }
        let order = -self.exponent_at(root).round() as i64;
        if order <= 0 {
            return Ok(c(0.0));
        }
        let m = order as usize;
        // Taylor coefficients of prefactor * prod_{r_j != root} (root - r_j + u)^{e_j}
        let mut series = vec![c(0.0); m];
        series[0] = self.prefactor;
        for &(r, e) in &self.factors {
            if r == root {
                continue;
            }
            let d = root - r;
            let mut factor = vec![c(0.0); m];
            let mut coef = d.powf(e);
            for (n, slot) in factor.iter_mut().enumerate() {
                *slot = c(coef);
                coef *= (e - n as f64) / ((n + 1) as f64 * d);
            }
            let mut next = vec![c(0.0); m];
            for i in 0..m {
                for j in 0..m - i {
                    next[i + j] += series[i] * factor[j];
                }
            }
            series = next;
        }
        Ok(series[m - 1])
    }

    /// Same factors, prefactor multiplied by `s`.
    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.prefactor *= s;
        out
    }
}

impl BranchTracked for HalfPlaneForm {
    fn branch_points(&self) -> &[Complex64] {
        &self.roots
    }

    fn eval_with_args(&self, z: Complex64, args: &[f64]) -> Complex64 {
        let mut log = Complex64::new(0.0, 0.0);
        for (&(r, e), &a) in self.factors.iter().zip(args) {
            if e == 0.0 {
                continue;
            }
            let m = (z - r).norm();
            if m == 0.0 {
                return if e > 0.0 { c(0.0) } else { Complex64::new(f64::INFINITY, f64::INFINITY) };
            }
            log += Complex64::new(e * m.ln(), e * a);
        }
        self.prefactor * log.exp()
    }
}

/// Unwrapped arguments carried along successive evaluations of one form.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchState {
    z: Complex64,
    args: Vec<f64>,
}

impl BranchState {
    /// Starts at the midpoint of the normalization interval.
    pub fn new(form: &HalfPlaneForm) -> Self {
        let (lo, hi) = form.normalization_interval;
        Self::at(form, c(0.5 * (lo + hi)))
    }

    /// Starts at `z` on the upper-half-plane branch.
    pub fn at(form: &HalfPlaneForm, z: Complex64) -> Self {
        Self { z, args: form.upper_args(z) }
    }

    pub fn args(&self) -> &[f64] {
        &self.args
    }

    pub fn point(&self) -> Complex64 {
        self.z
    }
}

/// Evaluates `form` at `z`, continuing the branch from the previous point held
/// in `state`. Steps must not wind around a root in one go.
pub fn eval_form(form: &HalfPlaneForm, z: Complex64, state: &mut BranchState) -> Result<Complex64, FormError> {
    for (&(r, _), a) in form.factors.iter().zip(state.args.iter_mut()) {
        let prev = state.z - r;
        let now = z - r;
        if now.norm() > 0.0 && prev.norm() > 0.0 {
            *a += (now / prev).arg();
        }
    }
    state.z = z;
    form.checked(z, &state.args)
}

/// `(theta(z - zero) / theta(z - pole))^power` with real shifts, on the branch
/// that is positive on `(max(zero, pole) - 1, min(zero, pole))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBracket {
    pub zero: f64,
    pub pole: f64,
    pub power: f64,
}

/// `prefactor * prod theta(z - shift)^power * bracket` on the strip
/// `0 <= Im z < Im tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusForm {
    theta_factors: Vec<(Complex64, i32)>,
    prefactor: Complex64,
    bracket: Option<ThetaBracket>,
    modulus: TorusModulus,
}

impl TorusForm {
    pub fn new(
        theta_factors: Vec<(Complex64, i32)>,
        prefactor: Complex64,
        bracket: Option<ThetaBracket>,
        modulus: TorusModulus,
    ) -> Self {
        Self { theta_factors, prefactor, bracket, modulus }
    }

    pub fn modulus(&self) -> &TorusModulus {
        &self.modulus
    }

    pub fn theta_factors(&self) -> &[(Complex64, i32)] {
        &self.theta_factors
    }

    pub fn bracket(&self) -> Option<ThetaBracket> {
        self.bracket
    }

    /// Net degree of the theta divisor; zero for a function on the torus.
    pub fn divisor_degree(&self) -> i32 {
        self.theta_factors.iter().map(|f| f.1).sum()
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, FormError> {
        let mut v = self.prefactor;
        for &(s, p) in &self.theta_factors {
            let t = theta(z - s, &self.modulus);
            if p < 0 && t == c(0.0) {
                return Err(FormError::Pole { form: "torus form", at: z });
            }
            v *= t.powi(p);
        }
        if let Some(b) = self.bracket {
            let l = log_theta_ratio_strip(z, b.zero, b.pole, &self.modulus)?;
            v *= (l * b.power).exp();
        }
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(FormError::Pole { form: "torus form", at: z });
        }
        Ok(v)
    }

    /// Order of vanishing at `p` (negative for poles), with the bracket's
    /// fractional contribution.
    pub fn order_at(&self, p: Complex64) -> f64 {
        let same = |s: Complex64| {
            let d = p - s;
            let m = (d.im / self.modulus.im()).round();
            let r = d - self.modulus.tau() * m;
            (r.re - r.re.round()).abs() < 1e-12 && r.im.abs() < 1e-12
        };
        let mut ord: f64 = self.theta_factors.iter().filter(|f| same(f.0)).map(|f| f.1 as f64).sum();
        if let Some(b) = self.bracket {
            if same(c(b.zero)) {
                ord += b.power;
            }
            if same(c(b.pole)) {
                ord -= b.power;
            }
        }
        ord
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormSource {
    /// `G dh = rho phi1`, `dh / G = phi2 / rho`.
    HalfPlane { phi1: HalfPlaneForm, phi2: HalfPlaneForm, dh: HalfPlaneForm },
    /// `G` and `dh` on the torus.
    Torus { g: TorusForm, dh: TorusForm },
}

/// `(G dh, dh / G, dh)` with the Lopez-Ros factor, a real scale of `dh` and a
/// rotation of `G` about the vertical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeierstrassData {
    pub source: FormSource,
    pub rho: f64,
    pub dh_scale: f64,
    pub gauss_phase: f64,
}

/// Position and unit normal of the surface at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalMapSample {
    pub param: Complex64,
    pub position: [f64; 3],
    pub normal: [f64; 3],
}

impl WeierstrassData {
    pub fn half_plane(phi1: HalfPlaneForm, phi2: HalfPlaneForm, dh: HalfPlaneForm, rho: f64) -> Self {
        Self { source: FormSource::HalfPlane { phi1, phi2, dh }, rho, dh_scale: 1.0, gauss_phase: 0.0 }
    }

    pub fn torus(g: TorusForm, dh: TorusForm) -> Self {
        Self { source: FormSource::Torus { g, dh }, rho: 1.0, dh_scale: 1.0, gauss_phase: 0.0 }
    }

    /// Multiplies `dh` by a real factor, which scales the surface.
    pub fn with_dh_scale(mut self, s: f64) -> Self {
        self.dh_scale *= s;
        self
    }

    /// Multiplies `G` by `e^{i t}`, which rotates the surface about the vertical axis.
    pub fn with_gauss_rotation(mut self, t: f64) -> Self {
        self.gauss_phase += t;
        self
    }

    /// `[G dh, dh / G, dh]` at `z`.
    pub fn values(&self, z: Complex64) -> Result<[Complex64; 3], FormError> {
        let rot = Complex64::from_polar(1.0, self.gauss_phase);
        let s = self.dh_scale;
        match &self.source {
            FormSource::HalfPlane { phi1, phi2, dh } => {
                let named = |f: &HalfPlaneForm, name: &'static str| {
                    f.eval_upper(z).map_err(|e| match e {
                        FormError::Pole { at, .. } => FormError::Pole { form: name, at },
                        other => other,
                    })
                };
                let p1 = named(phi1, "G dh")?;
                let p2 = named(phi2, "dh/G")?;
                let h = named(dh, "dh")?;
                Ok([p1 * self.rho * rot * s, p2 / self.rho / rot * s, h * s])
            }
            FormSource::Torus { g, dh } => {
                let gv = g.eval(z).map_err(|_| FormError::Pole { form: "G", at: z })?;
                let h = dh.eval(z).map_err(|_| FormError::Pole { form: "dh", at: z })?;
                if gv == c(0.0) && h != c(0.0) {
                    return Err(FormError::Pole { form: "dh/G", at: z });
                }
                let inv = if gv == c(0.0) { c(0.0) } else { h / gv };
                Ok([gv * h * rot * s, inv / rot * s, h * s])
            }
        }
    }

    /// Gauss map `G(z)`.
    pub fn gauss(&self, z: Complex64) -> Result<Complex64, FormError> {
        let rot = Complex64::from_polar(1.0, self.gauss_phase);
        match &self.source {
            FormSource::Torus { g, .. } => Ok(g.eval(z)? * rot),
            FormSource::HalfPlane { .. } => {
                let [gdh, _, dh] = self.values(z)?;
                Ok(gdh / dh)
            }
        }
    }

    /// Unit normal from stereographic projection of `G`.
    pub fn normal(&self, z: Complex64) -> Result<[f64; 3], FormError> {
        let g = self.gauss(z)?;
        Ok(normal_from_gauss(g))
    }
}

pub fn normal_from_gauss(g: Complex64) -> [f64; 3] {
    if !(g.re.is_finite() && g.im.is_finite()) {
        return [0.0, 0.0, 1.0];
    }
    let n2 = g.norm_sqr();
    let d = n2 + 1.0;
    [2.0 * g.re / d, 2.0 * g.im / d, (n2 - 1.0) / d]
}

/// `(w1, w2, w3) = (1/2 (1/G - G) dh, i/2 (1/G + G) dh, dh)` at `z`.
pub fn omega_forms(data: &WeierstrassData, z: Complex64) -> Result<[Complex64; 3], FormError> {
    Ok(omega_from_values(data.values(z)?))
}

pub fn omega_from_values([gdh, inv, dh]: [Complex64; 3]) -> [Complex64; 3] {
    let i = Complex64::i();
    [(inv - gdh) * 0.5, i * (inv + gdh) * 0.5, dh]
}

/// Real part of the integral of the three forms along a chained path.
pub fn integrate_map(data: &WeierstrassData, path: &[PathSegment], base: Complex64) -> Result<[f64; 3], FormError> {
    integrate_map_with(data, path, base, &QuadratureConfig::default())
}

pub fn integrate_map_with(
    data: &WeierstrassData,
    path: &[PathSegment],
    base: Complex64,
    cfg: &QuadratureConfig,
) -> Result<[f64; 3], FormError> {
    let mut at = base;
    let mut out = [0.0; 3];
    for seg in path {
        if (seg.start_point() - at).norm() > 1e-12 * (1.0 + at.norm()) {
            return Err(FormError::DisconnectedPath(at));
        }
        let r = integrate_along(
            |z| omega_forms(data, z).unwrap_or([Complex64::new(f64::NAN, f64::NAN); 3]),
            seg,
            cfg,
        )?;
        for k in 0..3 {
            out[k] += r.value[k].re;
        }
        at = seg.end_point().unwrap_or(at);
    }
    Ok(out)
}

/// The Lopez-Ros factor `rho = sqrt(conj(p2) / p1)` that makes
/// `rho p1 = conj(p2 / rho)`. The ratio must be a positive real.
pub fn lopez_ros_rho(p01_gdh: Complex64, p01_invgdh: Complex64) -> Result<f64, FormError> {
    let mismatch = FormError::PhaseMismatch { p1: p01_gdh, p2: p01_invgdh };
    if p01_gdh.norm() == 0.0 || p01_invgdh.norm() == 0.0 {
        return Err(mismatch);
    }
    let ratio = p01_invgdh.conj() / p01_gdh;
    if ratio.re <= 0.0 || ratio.im.abs() > 1e-8 * ratio.norm() {
        return Err(mismatch);
    }
    Ok(ratio.re.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndType {
    Catenoidal,
    Enneper,
    Scherk,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Puncture {
    Point(Complex64),
    Infinity,
}

/// End type with the orders of `G` and `dh` in the local coordinate of the
/// completed surface (`multiplicity` sheets of the wedge around the end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndClassification {
    pub kind: EndType,
    /// positive: zero of `G`, negative: pole
    pub gauss_order: i64,
    /// positive: zero of `dh`, negative: pole
    pub dh_order: i64,
    pub multiplicity: u32,
}

impl EndClassification {
    pub fn gauss_zero_order(&self) -> i64 {
        self.gauss_order.max(0)
    }

    pub fn dh_pole_order(&self) -> i64 {
        (-self.dh_order).max(0)
    }
}

/// Classifies an end from the exponents of `G` and `dh` at the puncture.
///
/// `g` and `d` are the (possibly fractional) orders of `G` and of `dh` in the
/// parameter domain. The local coordinate of the completed surface is the
/// smallest `k`-th root making both integral.
pub fn classify_orders(g: f64, d: f64) -> EndClassification {
    let integral = |x: f64| (x - x.round()).abs() < 1e-9;
    let k = (1..=1000u32).find(|&k| integral(k as f64 * g) && integral(k as f64 * (d + 1.0))).unwrap_or(1);
    let kf = k as f64;
    let gauss_order = (kf * g).round() as i64;
    let dh_order = (kf * (d + 1.0)).round() as i64 - 1;
    let worst_pole = [-(dh_order + gauss_order), -(dh_order - gauss_order), -dh_order].into_iter().max().unwrap_or(0);
    let kind = if worst_pole == 1 {
        EndType::Scherk
    } else if worst_pole == 2 && gauss_order.abs() == 1 && dh_order == -1 {
        EndType::Catenoidal
    } else if worst_pole >= 3 && dh_order <= -2 {
        EndType::Enneper
    } else {
        EndType::Unclassified
    };
    EndClassification { kind, gauss_order, dh_order, multiplicity: k }
}

pub fn classify_end(data: &WeierstrassData, puncture: Puncture) -> EndClassification {
    match (&data.source, puncture) {
        (FormSource::HalfPlane { phi1, dh, .. }, Puncture::Infinity) => {
            // z^s dz = -w^{-s-2} dw with w = 1/z
            let d = -dh.exponent_sum() - 2.0;
            let g = dh.exponent_sum() - phi1.exponent_sum();
            classify_orders(g, d)
        }
        (FormSource::HalfPlane { phi1, dh, .. }, Puncture::Point(p)) => {
            let d = dh.exponent_at(p.re);
            let g = phi1.exponent_at(p.re) - d;
            classify_orders(g, d)
        }
        (FormSource::Torus { g, dh }, Puncture::Point(p)) => classify_orders(g.order_at(p), dh.order_at(p)),
        (FormSource::Torus { .. }, Puncture::Infinity) => {
            EndClassification { kind: EndType::Unclassified, gauss_order: 0, dh_order: 0, multiplicity: 1 }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DccwEnd {
    A,
    C,
}

/// Logarithmic growth of the catenoidal ends of the catenoidal Costa-Wohlgemuth data.
pub fn growth_rate(params: &DccwParams, puncture: DccwEnd) -> f64 {
    let (a, b, c) = (params.a, params.b, params.c);
    match puncture {
        DccwEnd::A => (b * b - a * a) / (2.0 * a * (a * a - c * c)),
        DccwEnd::C => (c * c - b * b) / (2.0 * c * (a * a - c * c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn de_phi1(a: f64, b: f64, alpha: f64) -> HalfPlaneForm {
        let e = 1.0 - alpha;
        HalfPlaneForm::new(
            vec![(0.0, e), (1.0, -e), (-1.0, -e), (a, e), (-a, e), (b, -e), (-b, -e)],
            1.0,
            (0.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn rational_value_at_half() {
        // z (a^2 - z^2) / ((1 - z^2)(b^2 - z^2)) at z = 1/2, (a, b) = (2, 3)
        let f = de_phi1(2.0, 3.0, 0.0);
        let v = f.eval_upper(c(0.5)).unwrap();
        let expected = 0.5 * (4.0 - 0.25) / ((1.0 - 0.25) * (9.0 - 0.25));
        assert!((v - c(expected)).norm() < 1e-14);
    }

    #[test]
    fn positive_at_normalization_midpoint() {
        for alpha in [0.0, 0.1, 0.37] {
            let v = de_phi1(2.3, 3.1, alpha).eval_upper(c(0.5)).unwrap();
            assert!(v.re > 0.0 && v.im.abs() < 1e-12 * v.re);
        }
    }

    #[test]
    fn residues_of_simple_poles() {
        let f = de_phi1(2.0, 3.0, 0.0);
        // residue at 1 of z (4 - z^2) / ((1 - z)(1 + z)(9 - z^2)) = -3/16
        let r = f.residue(1.0).unwrap();
        assert!((r - c(-3.0 / 16.0)).norm() < 1e-14);
    }

    #[test]
    fn residue_of_double_pole() {
        // 1/(z-1)^2 * 1/(z-3): residue at 1 is d/dz (1/(z-3)) = -1/4
        let f = HalfPlaneForm::new(vec![(1.0, -2.0), (3.0, -1.0)], 1.0, (-1.0, 0.0)).unwrap();
        assert!(f.prefactor().im.abs() < 1e-15);
        assert!((f.residue(1.0).unwrap() - f.prefactor() * -0.25).norm() < 1e-14);
    }

    #[test]
    fn branch_state_continues_below_axis() {
        let f = HalfPlaneForm::new(vec![(0.0, 0.5)], 1.0, (0.0, 1.0)).unwrap();
        let mut st = BranchState::new(&f);
        let mut last = c(0.0);
        for k in 0..=64 {
            let t = 2.0 * PI * k as f64 / 64.0;
            last = eval_form(&f, Complex64::from_polar(0.5, t), &mut st).unwrap();
        }
        // sqrt picks up a sign after one turn
        assert!((last + c(0.5f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn pole_is_reported() {
        let f = de_phi1(2.0, 3.0, 0.0);
        assert!(matches!(f.eval_upper(c(1.0)), Err(FormError::Pole { .. })));
    }

    #[test]
    fn omega_with_unit_gauss_map() {
        let f = HalfPlaneForm::new(vec![], 1.0, (0.0, 1.0)).unwrap();
        let data = WeierstrassData::half_plane(f.clone(), f.clone(), f, 1.0);
        let [w1, w2, w3] = omega_forms(&data, Complex64::new(0.3, 0.2)).unwrap();
        assert!(w1.norm() < 1e-15);
        assert!((w2 - Complex64::i()).norm() < 1e-15);
        assert!((w3 - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn lopez_ros_examples() {
        assert_eq!(lopez_ros_rho(c(-2.0), c(-8.0)).unwrap(), 2.0);
        assert_eq!(lopez_ros_rho(c(3.0), c(3.0)).unwrap(), 1.0);
        assert!(lopez_ros_rho(c(1.0), c(-1.0)).is_err());
    }

    #[test]
    fn classification_patterns() {
        let enneper = classify_orders(1.0 - 0.2, -2.0);
        assert_eq!((enneper.kind, enneper.gauss_order, enneper.dh_order), (EndType::Enneper, 4, -6));
        assert_eq!(classify_orders(1.0, 0.0).kind, EndType::Scherk);
        assert_eq!(classify_orders(0.25, -1.0).kind, EndType::Catenoidal);
    }
}
