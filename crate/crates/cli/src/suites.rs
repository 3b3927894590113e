//! Verification suites: the numbered acceptance criteria and the property
//! checks, each reported as a list of named checks with target and tolerance.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use dihedral_core::builder::{
    build_fundamental_piece, horizontal_spread, imaginary_axis_spread, moebius_symmetry, plane_angle, sample_domain,
    verify_conformality_and_orthogonality, verify_plane_alignment, wedge_angle, FundamentalDomain, Moebius,
    DEFAULT_PUNCTURE_RADIUS,
};
use dihedral_core::periods::*;
use dihedral_core::quadrature::integrate_segment;
use dihedral_core::theta::{theta, theta_prime_zero, zero_count};
use dihedral_core::weierstrass::{
    classify_end, growth_rate, integrate_map, omega_forms, DccwEnd, EndType, Puncture,
};
use dihedral_core::{Complex64, PathSegment, TorusModulus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tolerances of the acceptance criteria.
pub mod tol {
    pub const DE_LIMIT_ROOT: f64 = 1e-12;
    pub const DE_QUAD_ROOT: f64 = 1e-8;
    pub const DE_JACOBIAN_REL: f64 = 1e-6;
    pub const DCCW_LIMIT_ROOT: f64 = 1e-10;
    pub const DCCW_DET_ABS: f64 = 1e-6;
    pub const DCCW_DET: f64 = 0.000151467;
    pub const DKS_FACTOR_REL: f64 = 1e-5;
    pub const TILDE_P_ROOT: f64 = 1e-10;
    pub const DKS_TORUS_ROOT: f64 = 1e-7;
    pub const CONTINUATION: f64 = 1e-8;
    pub const THETA: f64 = 1e-12;
    pub const NULL: f64 = 1e-10;
    pub const CONFORMAL: f64 = 1e-4;
    pub const ORTHOGONAL: f64 = 1e-3;
    /// Relative to the mesh diameter.
    pub const PLANE: f64 = 1e-6;
    pub const WEDGE: f64 = 1e-6;
    pub const FIXED_CURVE: f64 = 1e-7;
    pub const PARALLEL: f64 = 1e-6;
    pub const PATHS: f64 = 1e-7;
    pub const MOEBIUS: f64 = 1e-5;
    pub const QUADRATURE: f64 = 1e-10;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub target: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// `value < tol`.
    pub fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), target: "0".into(), value, tol, pass: value < tol }
    }

    /// `|value - target| <= tol`.
    pub fn close(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self { name: name.into(), target: format!("{target:?}"), value, tol, pass: (value - target).abs() <= tol }
    }

    /// `|value - target| <= tol |target|`.
    pub fn relative(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let pass = (value - target).abs() <= tol * target.abs();
        Self { name: name.into(), target: format!("{target:?} (rel)"), value, tol, pass }
    }

    /// Sign condition `value > 0` (`positive`) or `value < 0`.
    pub fn sign(name: impl Into<String>, value: f64, positive: bool) -> Self {
        let pass = if positive { value > 0.0 } else { value < 0.0 };
        Self { name: name.into(), target: if positive { "> 0" } else { "< 0" }.into(), value, tol: 0.0, pass }
    }

    pub fn failed(name: impl Into<String>, err: impl fmt::Display) -> Self {
        Self { name: format!("{}: {err}", name.into()), target: "ok".into(), value: f64::NAN, tol: 0.0, pass: false }
    }

    /// `value == target` exactly.
    pub fn equal(name: impl Into<String>, value: f64, target: f64) -> Self {
        Self { name: name.into(), target: format!("{target:?}"), value, tol: 0.0, pass: value == target }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\tcheck={}\ttarget={}\tvalue={:e}\ttol={:e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.target,
            self.value,
            self.tol
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u32,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl CriterionReport {
    pub fn within_time(&self) -> bool {
        self.seconds < self.limit_seconds
    }

    pub fn pass(&self) -> bool {
        self.within_time() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// One summary line.
    pub fn line(&self) -> String {
        let failed = self.failures().count();
        format!(
            "{} criterion {:>2}: {} ({}/{} checks, {:.2}s of {:.0}s)",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.checks.len() - failed,
            self.checks.len(),
            self.seconds,
            self.limit_seconds
        )
    }
}

fn timed(id: u32, title: &'static str, limit_seconds: f64, body: impl FnOnce(&mut Vec<Check>)) -> CriterionReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    body(&mut checks);
    CriterionReport { id, title, checks, seconds: start.elapsed().as_secs_f64(), limit_seconds }
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn det2(j: [[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn de_exact_root() -> (f64, f64) {
    de_limit_root()
}

fn dccw_exact_root() -> (f64, f64, f64) {
    let p = dccw_limit_root();
    (p.a, p.b, p.c)
}

pub fn default_init(family: Family) -> FamilyParams {
    match family {
        Family::De => FamilyParams::De(DeParams { a: 2.3, b: 3.1, alpha: 0.0, rho: 1.0 }),
        Family::Dccw => FamilyParams::Dccw(DccwParams::equal_growth(1.85, 5.83, 0.0)),
        Family::Dks => FamilyParams::Dks(DksParams { a: 0.2, c: 0.2, tau: unit_modulus(), alpha: 0.0 }),
    }
}

fn unit_modulus() -> TorusModulus {
    TorusModulus::imaginary(1.0).expect("i is a valid modulus")
}

pub const DE_SCHEDULE: [f64; 7] = [0.0, 1.0 / 50.0, 1.0 / 40.0, 1.0 / 30.0, 1.0 / 20.0, 1.0 / 10.0, 1.0 / 5.0];
pub const DCCW_SCHEDULE: [f64; 8] =
    [0.0, 1.0 / 50.0, 1.0 / 40.0, 1.0 / 30.0, 1.0 / 20.0, 1.0 / 10.0, 1.0 / 8.0, 1.0 / 6.0];
pub const DKS_ALPHA_SCHEDULE: [f64; 3] = [0.0, 1.0 / 40.0, 1.0 / 20.0];
pub const DKS_TAU_SCHEDULE: [f64; 5] = [0.8, 0.9, 1.0, 1.1, 1.25];

fn record_at(result: &ContinuationResult, alpha: f64) -> Option<FamilyParams> {
    result.records.iter().find(|r| r.step.map(|s| s.parameter) == Some(alpha)).map(|r| r.params)
}

pub fn criterion_1() -> CriterionReport {
    timed(1, "DE exact root", 1.0, |out| {
        let (a, b) = de_exact_root();
        out.push(Check::below("closed-form residual at the exact root", norm2(de_residual_limit(a, b)), tol::DE_LIMIT_ROOT));
        match de_residual(a, b, 0.0) {
            Ok(r) => out.push(Check::below("quadrature residual at the exact root", r.norm, tol::DE_QUAD_ROOT)),
            Err(e) => out.push(Check::failed("quadrature residual", e)),
        }
    })
}

pub fn criterion_2() -> CriterionReport {
    timed(2, "DE Jacobian determinant", 1.0, |out| {
        let (a, b) = de_exact_root();
        let f = |x: [f64; 2]| Ok(de_residual_limit(x[0], x[1]));
        match fd_jacobian(&f, [a, b], 1e-6) {
            Ok(j) => out.push(Check::relative(
                "finite-difference det vs 8ab(b^2+1)/((a^2-1)(b^2-a^2)^3)",
                det2(j),
                de_jacobian_limit(a, b),
                tol::DE_JACOBIAN_REL,
            )),
            Err(e) => out.push(Check::failed("finite-difference Jacobian", e)),
        }
    })
}

pub fn criterion_3() -> CriterionReport {
    timed(3, "DCCW root and determinant", 5.0, |out| {
        let (a, b, c) = dccw_exact_root();
        out.push(Check::below("closed-form residual at the exact root", norm2(dccw_residual_limit(a, b, c)), tol::DCCW_LIMIT_ROOT));
        let f = |x: [f64; 2]| Ok(dccw_residual_limit(x[0], x[1], x[1] * x[1] / x[0]));
        match fd_jacobian(&f, [a, b], 1e-6) {
            Ok(j) => out.push(Check::close("finite-difference det of P(a, b, b^2/a)", det2(j), tol::DCCW_DET, tol::DCCW_DET_ABS)),
            Err(e) => out.push(Check::failed("finite-difference Jacobian", e)),
        }
    })
}

pub fn criterion_4() -> CriterionReport {
    timed(4, "DKS signs and factorization", 30.0, |out| {
        for k in 1..=19 {
            let at = k as f64 * 0.05;
            match (f1(at), f2(at)) {
                (Ok(v1), Ok(v2)) => {
                    out.push(Check::sign(format!("f1({at:.2}) > 0"), v1, true));
                    out.push(Check::sign(format!("f2({at:.2}) < 0"), v2, false));
                }
                (Err(e), _) | (_, Err(e)) => out.push(Check::failed(format!("f1/f2 at {at:.2}"), e)),
            }
        }
        for at in [0.25, 0.5, 0.75] {
            let check = || -> Result<Check, PeriodError> {
                let h = 1e-6;
                let column = |dx: f64, dy: f64| -> Result<[Complex64; 2], PeriodError> {
                    let p = tilde_p_complex(at + dx, at + dy)?;
                    let m = tilde_p_complex(at - dx, at - dy)?;
                    Ok([(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)])
                };
                let (cx_, cy_) = (column(h, 0.0)?, column(0.0, h)?);
                let det = cx_[0] * cy_[1] - cy_[0] * cx_[1];
                let lhs = -Complex64::i() * rho_tilde(at).powi(3) * det;
                let target = f1(at)? * f2(at)?;
                let mut c = Check::relative(format!("-i rho^3 det(D tildeP) vs f1 f2 at {at}"), lhs.re, target, tol::DKS_FACTOR_REL);
                c.pass &= lhs.im.abs() <= tol::DKS_FACTOR_REL * target.abs();
                Ok(c)
            };
            out.push(check().unwrap_or_else(|e| Check::failed(format!("factorization at {at}"), e)));
        }
    })
}

pub fn criterion_5() -> CriterionReport {
    timed(5, "DKS alpha=0 root, both parametrizations", 60.0, |out| {
        let at = a0_tilde();
        match tilde_p(at, at) {
            Ok(p) => out.push(Check::below("tildeP(a0, a0)", norm2(p), tol::TILDE_P_ROOT)),
            Err(e) => out.push(Check::failed("tildeP", e)),
        }
        let a = a0_torus();
        match dks_residual(a, a, unit_modulus(), 0.0) {
            Ok(r) => out.push(Check::below("theta-path residual at (a0, a0, i, 0)", r.norm, tol::DKS_TORUS_ROOT)),
            Err(e) => out.push(Check::failed("theta-path residual", e)),
        }
    })
}

/// Continuation branches used by criteria 6 and 8.
pub struct Branches {
    pub de: Result<ContinuationResult, PeriodError>,
    pub dccw: Result<ContinuationResult, PeriodError>,
    pub dks_tau: Result<ContinuationResult, PeriodError>,
    pub dks_alpha: Result<ContinuationResult, PeriodError>,
}

pub fn solve_branches() -> Branches {
    let opts = SolveOptions::default();
    let init = |f| default_init(f);
    let (de, dccw) = rayon::join(
        || continuation(Family::De, &DE_SCHEDULE, None, &init(Family::De), &opts),
        || continuation(Family::Dccw, &DCCW_SCHEDULE, None, &init(Family::Dccw), &opts),
    );
    let dks0 = match init(Family::Dks) {
        FamilyParams::Dks(p) => p,
        _ => unreachable!("default DKS init"),
    };
    let (dks_tau, dks_alpha) = rayon::join(
        || tau_continuation(0.0, &DKS_TAU_SCHEDULE, &dks0, &opts),
        || continuation(Family::Dks, &DKS_ALPHA_SCHEDULE, None, &FamilyParams::Dks(dks0), &opts),
    );
    Branches { de, dccw, dks_tau, dks_alpha }
}

fn branch_checks(
    out: &mut Vec<Check>,
    label: &str,
    branch: &Result<ContinuationResult, PeriodError>,
    schedule: &[f64],
    required: f64,
) {
    let result = match branch {
        Ok(r) => r,
        Err(e) => return out.push(Check::failed(format!("{label} branch"), e)),
    };
    for r in &result.records {
        let at = r.step.map(|s| s.parameter).unwrap_or(f64::NAN);
        out.push(Check::below(format!("{label} residual at {at:.6}"), r.residual.norm, tol::CONTINUATION));
    }
    let reached: Vec<f64> = schedule.iter().copied().filter(|s| record_at(result, *s).is_some()).collect();
    let top = reached.iter().copied().fold(f64::NAN, f64::max);
    let mut c = Check::sign(format!("{label} reaches {required:.6}"), top - required + 1e-15, true);
    c.target = format!(">= {required:?}");
    c.value = top;
    out.push(c);
}

pub fn criterion_6_with(branches: &Branches) -> Vec<Check> {
    let mut out = Vec::new();
    branch_checks(&mut out, "DE", &branches.de, &DE_SCHEDULE, 0.2);
    branch_checks(&mut out, "DCCW", &branches.dccw, &DCCW_SCHEDULE, 0.1);
    if let Ok(r) = &branches.dccw {
        // continuity: adjacent solutions move less than ten times the step
        for w in r.records.windows(2) {
            let (p, q) = (w[0].params.unknowns(), w[1].params.unknowns());
            let step = (w[1].params.alpha() - w[0].params.alpha()).abs();
            let jump = (q[0] - p[0]).abs().max((q[1] - p[1]).abs());
            out.push(Check::below(format!("DCCW continuity {:.4}->{:.4}", w[0].params.alpha(), w[1].params.alpha()), jump, 10.0 * step));
        }
    }
    match &branches.dks_tau {
        Ok(r) => {
            for t in [0.9, 1.0, 1.1] {
                let hit = r.records.iter().find(|x| x.step.map(|s| s.parameter) == Some(t));
                match hit {
                    Some(x) => out.push(Check::below(format!("DKS tau={t}i residual"), x.residual.norm, tol::CONTINUATION)),
                    None => out.push(Check::failed(format!("DKS tau={t}i"), "not reached")),
                }
            }
        }
        Err(e) => out.push(Check::failed("DKS tau branch", e)),
    }
    branch_checks(&mut out, "DKS alpha", &branches.dks_alpha, &DKS_ALPHA_SCHEDULE, 0.05);
    out
}

pub fn criterion_6() -> CriterionReport {
    timed(6, "continuation branches", 600.0, |out| {
        let b = solve_branches();
        out.extend(criterion_6_with(&b));
    })
}

pub const THETA_MODULI: [f64; 3] = [0.5, 1.0, 2.0];

fn theta_points(tau: &TorusModulus, seed: u64, n: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..tau.im()))).collect()
}

fn rel_gap(lhs: Complex64, rhs: Complex64) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0)
}

pub fn criterion_7() -> CriterionReport {
    timed(7, "theta property suite", 5.0, |out| {
        let i = Complex64::i();
        for (m, &t) in THETA_MODULI.iter().enumerate() {
            let tau = TorusModulus::imaginary(t).expect("positive modulus");
            let pts = theta_points(&tau, 17 + m as u64, 100);
            let worst = |f: &dyn Fn(Complex64) -> f64| pts.iter().map(|&z| f(z)).fold(0.0, f64::max);
            let p1 = worst(&|z| rel_gap(theta(-z, &tau), -theta(z, &tau)));
            let p2 = worst(&|z| rel_gap(theta(z + 1.0, &tau), theta(z, &tau)));
            let p3 = worst(&|z| {
                let factor = (-i * PI * tau.tau() - i * 2.0 * PI * z).exp();
                rel_gap(theta(z + tau.tau(), &tau), -factor * theta(z, &tau))
            });
            let p5 = worst(&|z| rel_gap(theta(z.conj(), &tau), theta(z, &tau).conj()));
            out.push(Check::below(format!("odd, tau={t}i"), p1, tol::THETA));
            out.push(Check::below(format!("integer period theta(z+1)=theta(z), tau={t}i"), p2, tol::THETA));
            out.push(Check::below(format!("quasi-period tau, tau={t}i"), p3, tol::THETA));
            let d0 = theta_prime_zero(&tau);
            let h = 1e-6;
            let fd = (theta(Complex64::new(h, 0.0), &tau) - theta(Complex64::new(-h, 0.0), &tau)) / (2.0 * h);
            out.push(Check::sign(format!("|theta'(0)| > 0, tau={t}i"), d0.norm(), true));
            out.push(Check::below(format!("theta'(0) vs difference quotient, tau={t}i"), (fd - d0).norm() / d0.norm(), 1e-6));
            out.push(Check::below(format!("conjugation, tau={t}i"), p5, tol::THETA));
            match zero_count(Complex64::new(0.0, 0.0), &tau) {
                Ok(n) => out.push(Check::close(format!("zeros per cell, tau={t}i"), n, 1.0, 1e-9)),
                Err(e) => out.push(Check::failed("zero count", e)),
            }
        }
    })
}

/// Solved records used by the geometry suite.
pub struct GeometryCase {
    pub label: String,
    pub params: FamilyParams,
}

pub fn geometry_cases(branches: &Branches) -> Vec<GeometryCase> {
    let mut cases = Vec::new();
    let mut take = |label: &str, r: &Result<ContinuationResult, PeriodError>, alpha: f64| {
        if let Some(p) = r.as_ref().ok().and_then(|r| record_at(r, alpha)) {
            cases.push(GeometryCase { label: label.into(), params: p });
        }
    };
    take("DE alpha=0", &branches.de, 0.0);
    take("DE alpha=1/5", &branches.de, 0.2);
    take("DCCW alpha=0", &branches.dccw, 0.0);
    take("DCCW alpha=1/10", &branches.dccw, 0.1);
    take("DKS alpha=0", &branches.dks_alpha, 0.0);
    take("DKS alpha=1/20", &branches.dks_alpha, 0.05);
    cases
}

pub const GEOMETRY_RESOLUTION: usize = 32;
pub const GEOMETRY_SAMPLES: usize = 24;

pub fn geometry_checks(case: &GeometryCase) -> Vec<Check> {
    let mut out = Vec::new();
    let label = &case.label;
    let data = match case.params.weierstrass_data() {
        Ok(d) => d,
        Err(e) => return vec![Check::failed(format!("{label} data"), e)],
    };
    let domain = FundamentalDomain::for_data(&data);
    let built = sample_domain(&domain, GEOMETRY_RESOLUTION, DEFAULT_PUNCTURE_RADIUS)
        .and_then(|g| build_fundamental_piece(&data, &domain, &g));
    let (mesh, build) = match built {
        Ok(m) => m,
        Err(e) => return vec![Check::failed(format!("{label} mesh"), e)],
    };
    out.push(Check::below(format!("{label}: path independence"), build.path_mismatch, tol::PATHS));
    match verify_conformality_and_orthogonality(&data, &domain, GEOMETRY_SAMPLES) {
        Ok(c) => {
            out.push(Check::below(format!("{label}: null identity"), c.max_null_residual, tol::NULL));
            out.push(Check::below(format!("{label}: |E-G|/E"), c.max_metric_ratio, tol::CONFORMAL));
            out.push(Check::below(format!("{label}: |F|/E"), c.max_shear, tol::CONFORMAL));
            out.push(Check::below(format!("{label}: boundary incidence angle"), c.max_boundary_angle, tol::ORTHOGONAL));
        }
        Err(e) => out.push(Check::failed(format!("{label}: conformality"), e)),
    }
    let diam = mesh.diameter();
    let report = verify_plane_alignment(&mesh, tol::PLANE * diam);
    for g in &report.groups {
        out.push(Check::below(
            format!("{label}: plane {} deviation / diameter", g.name),
            g.max_fit_deviation.max(g.max_nominal_deviation) / diam,
            tol::PLANE,
        ));
    }
    let alpha = case.params.alpha();
    let (first, second) = match case.params.family() {
        Family::Dks => ("V0", "V1"),
        _ => ("A", "B"),
    };
    match wedge_angle(&report, first, second) {
        Some(w) => out.push(Check::close(format!("{label}: wedge angle"), w, PI * alpha, tol::WEDGE)),
        None => out.push(Check::failed(format!("{label}: wedge angle"), "plane groups missing")),
    }
    match case.params.family() {
        Family::Dccw => {
            out.push(Check::below(format!("{label}: horizontal fixed curve"), imaginary_axis_spread(&mesh), tol::FIXED_CURVE));
        }
        Family::Dks => {
            for group in ["H0", "H1"] {
                let tags = mesh.planes.iter().find(|g| g.name == group).map(|g| g.tags.clone()).unwrap_or_default();
                out.push(Check::below(format!("{label}: horizontal fixed curve {group}"), horizontal_spread(&mesh, &tags), tol::FIXED_CURVE));
            }
            match (report.tag("dr"), report.tag("u")) {
                (Some(dr), Some(u)) => out.push(Check::below(
                    format!("{label}: planes of dr and u parallel"),
                    plane_angle(dr.fitted_normal, u.fitted_normal),
                    tol::PARALLEL,
                )),
                _ => out.push(Check::failed(format!("{label}: parallel planes"), "pieces missing")),
            }
        }
        Family::De => {}
    }
    if case.params.family() == Family::Dccw && alpha == 0.0 {
        if let FamilyParams::Dccw(p) = case.params {
            let m = Moebius::through([1.0, p.a, p.c], [p.c, -p.c, -p.a]);
            match moebius_symmetry(&data, &domain, &m, 3, 12) {
                Ok(r) => {
                    out.push(Check::below(format!("{label}: order-3 automorphism orbit / scale"), r.orbit_residual / r.scale, tol::MOEBIUS));
                    out.push(Check::below(format!("{label}: order-3 automorphism fit / scale"), r.fit_residual / r.scale, tol::MOEBIUS));
                }
                Err(e) => out.push(Check::failed(format!("{label}: automorphism"), e)),
            }
        }
    }
    out
}

pub fn criterion_8_with(branches: &Branches) -> Vec<Check> {
    let cases = geometry_cases(branches);
    let mut out = Vec::new();
    if cases.len() < 6 {
        out.push(Check::failed("geometry cases", format!("only {} of 6 solved", cases.len())));
    }
    for case in &cases {
        out.extend(geometry_checks(case));
    }
    out
}

pub fn criterion_8() -> CriterionReport {
    timed(8, "geometry suite", 120.0, |out| {
        let b = solve_branches();
        out.extend(criterion_8_with(&b));
    })
}

pub fn criterion_9() -> CriterionReport {
    timed(9, "end classification", 1.0, |out| {
        let (a, b) = de_exact_root();
        for n in [2u32, 5, 10] {
            let alpha = 1.0 / n as f64;
            match de_data(&DeParams { a, b, alpha, rho: 1.0 }) {
                Ok(d) => {
                    let e = classify_end(&d, Puncture::Infinity);
                    out.push(Check::equal(format!("DE alpha=1/{n}: G zero order at infinity"), e.gauss_zero_order() as f64, (n - 1) as f64));
                    out.push(Check::equal(format!("DE alpha=1/{n}: dh pole order at infinity"), e.dh_pole_order() as f64, (n + 1) as f64));
                    out.push(Check::equal(format!("DE alpha=1/{n}: Enneper end"), (e.kind == EndType::Enneper) as u8 as f64, 1.0));
                }
                Err(e) => out.push(Check::failed(format!("DE alpha=1/{n} data"), e)),
            }
        }
        let (da, db) = (a, b);
        let (a, bb, c) = dccw_exact_root();
        let p = DccwParams { a, b: bb, c, alpha: 0.1 };
        match dccw_data(&p) {
            Ok(d) => {
                let ends = [a, -a, c, -c]
                    .iter()
                    .filter(|&&x| classify_end(&d, Puncture::Point(Complex64::new(x, 0.0))).kind == EndType::Catenoidal)
                    .count();
                out.push(Check::equal("DCCW alpha=1/10: catenoidal ends at +-a, +-c", ends as f64, 4.0));
                let (ga, gc) = (growth_rate(&p, DccwEnd::A), growth_rate(&p, DccwEnd::C));
                out.push(Check::close("DCCW growth rates equal under c=b^2/a", ga - gc, 0.0, 1e-12 * ga.abs()));
            }
            Err(e) => out.push(Check::failed("DCCW data", e)),
        }
        match de_data(&DeParams { a: da, b: db, alpha: 0.0, rho: 1.0 }) {
            Ok(d) => {
                let scherk = [0.0, 1.0, -1.0, da, -da, db, -db]
                    .iter()
                    .filter(|&&x| classify_end(&d, Puncture::Point(Complex64::new(x, 0.0))).kind == EndType::Scherk)
                    .count();
                out.push(Check::equal("DE alpha=0: Scherk ends at the seven finite points", scherk as f64, 7.0));
            }
            Err(e) => out.push(Check::failed("DE alpha=0 data", e)),
        }
    })
}

pub fn criterion_10() -> CriterionReport {
    timed(10, "quadrature oracles", 10.0, |out| {
        let one = |_: Complex64| Complex64::new(1.0, 0.0);
        let (z0, z1) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        let mut seg = |name: String, ea: f64, eb: f64, exact: f64| match integrate_segment(one, z0, z1, ea, eb, 1e-13) {
            Ok(r) => out.push(Check::close(name, r.value.re, exact, tol::QUADRATURE)),
            Err(e) => out.push(Check::failed(name, e)),
        };
        seg("Beta(1/2, 1/2) = pi".into(), -0.5, -0.5, PI);
        seg("Beta(3/2, 5/2) = pi/16".into(), 0.5, 1.5, PI / 16.0);
        for alpha in [1.0 / 3.0, 0.1, 0.02, 0.9] {
            seg(format!("Euler reflection at alpha={alpha:.4}"), alpha - 1.0, -alpha, PI / (PI * alpha).sin());
        }
        // contour radius invariance
        let radius_spread = |f: &dyn Fn(&PeriodConfig) -> Result<[f64; 2], PeriodError>| -> Result<f64, PeriodError> {
            let mut vals = Vec::new();
            for fraction in [0.25, 0.5, 0.75] {
                vals.push(f(&PeriodConfig { radius_fraction: fraction, ..PeriodConfig::default() })?);
            }
            Ok(vals.iter().map(|v| (v[0] - vals[0][0]).abs().max((v[1] - vals[0][1]).abs())).fold(0.0, f64::max))
        };
        let de = |cfg: &PeriodConfig| de_residual_with(2.33, 3.13, 0.1, cfg).map(|r| r.r);
        let dc = |cfg: &PeriodConfig| dccw_residual_with(1.9, 5.7, 5.7 * 5.7 / 1.9, 0.05, cfg).map(|r| r.r);
        for (name, f) in [("DE", &de as &dyn Fn(&PeriodConfig) -> _), ("DCCW", &dc)] {
            match radius_spread(f) {
                Ok(s) => out.push(Check::below(format!("{name} residual independent of contour radius"), s, tol::QUADRATURE)),
                Err(e) => out.push(Check::failed(format!("{name} radius invariance"), e)),
            }
        }
        // residue theorem for the rational alpha=0 forms
        for (a, b) in [(2.0, 3.0), (1.5, 4.0), de_exact_root()] {
            match de_residual(a, b, 0.0) {
                Ok(r) => {
                    let exact = de_residual_limit(a, b);
                    out.push(Check::below(format!("DE alpha=0 contour vs residues at ({a:.3}, {b:.3})"), norm2([r.r[0] - exact[0], r.r[1] - exact[1]]), tol::QUADRATURE));
                }
                Err(e) => out.push(Check::failed("DE alpha=0 contour", e)),
            }
        }
        match dccw_residual(2.0, 3.0, 4.0, 0.0) {
            Ok(r) => out.push(Check::below("DCCW (2,3,4) contour vs (-7/120, 7/80)", norm2([r.r[0] + 7.0 / 120.0, r.r[1] - 7.0 / 80.0]), tol::QUADRATURE)),
            Err(e) => out.push(Check::failed("DCCW (2,3,4) contour", e)),
        }
        let (a, b) = de_exact_root();
        let circle = || -> Result<f64, PeriodError> {
            let (phi1, _, _) = de_forms(a, b, 0.0)?;
            let gamma = contour_circle(0.0, 1.0, -1.0, a, 0.5)?;
            let value = circle_integral(&phi1, &gamma, &PeriodConfig::default().quad)?;
            let residues = phi1.residue(0.0)? + phi1.residue(1.0)?;
            Ok((value - Complex64::i() * 2.0 * PI * residues).norm())
        };
        match circle() {
            Ok(d) => out.push(Check::below("phi1 over the circle through 0 and 1 vs residues", d, tol::QUADRATURE)),
            Err(e) => out.push(Check::failed("phi1 circle", e)),
        }
    })
}

/// All acceptance criteria; the continuation branches are shared by 6 and 8.
pub fn paper_suite() -> Vec<CriterionReport> {
    let mut out = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    let start = Instant::now();
    let branches = solve_branches();
    let solve_time = start.elapsed().as_secs_f64();
    let t6 = Instant::now();
    let c6 = criterion_6_with(&branches);
    out.push(CriterionReport {
        id: 6,
        title: "continuation branches",
        checks: c6,
        seconds: solve_time + t6.elapsed().as_secs_f64(),
        limit_seconds: 600.0,
    });
    out.push(criterion_7());
    let t8 = Instant::now();
    let c8 = criterion_8_with(&branches);
    out.push(CriterionReport {
        id: 8,
        title: "geometry suite",
        checks: c8,
        seconds: solve_time + t8.elapsed().as_secs_f64(),
        limit_seconds: 120.0,
    });
    out.push(criterion_9());
    out.push(criterion_10());
    out
}

/// Property checks: random-point identities for the forms and theta,
/// quadrature linearity and path reversal.
pub fn properties_suite() -> Vec<CriterionReport> {
    let props = timed(0, "forms, theta and quadrature properties", 60.0, |out| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = [
            de_data(&DeParams { a: 2.33, b: 3.14, alpha: 0.1, rho: 1.3 }),
            dccw_data(&DccwParams::equal_growth(1.9, 5.7, 0.05)),
            dks_data(&DksParams { a: 0.21, c: 0.23, tau: unit_modulus(), alpha: 0.05 }),
        ];
        for (k, d) in data.iter().enumerate() {
            let d = match d {
                Ok(d) => d,
                Err(e) => {
                    out.push(Check::failed(format!("data {k}"), e));
                    continue;
                }
            };
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let z = if k == 2 {
                    Complex64::new(rng.gen_range(0.02..0.48), rng.gen_range(0.02..0.48))
                } else {
                    Complex64::new(rng.gen_range(-4.0..4.0), rng.gen_range(0.05..4.0))
                };
                if let Ok(w) = omega_forms(d, z) {
                    let s = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
                    worst = worst.max(s.norm() / (w[0].norm_sqr() + w[1].norm_sqr() + w[2].norm_sqr()));
                }
            }
            out.push(Check::below(format!("null identity, data set {k}"), worst, tol::NULL));
            let base = if k == 2 { Complex64::new(0.25, 0.25) } else { Complex64::new(0.0, 1.0) };
            let end = base + Complex64::new(0.13, 0.07);
            let path = [PathSegment::line(base, end), PathSegment::line(end, base)];
            match integrate_map(d, &path, base) {
                Ok(v) => out.push(Check::below(format!("path then reverse, data set {k}"), v.iter().map(|x| x.abs()).fold(0.0, f64::max), 1e-10)),
                Err(e) => out.push(Check::failed("path reversal", e)),
            }
        }
        for &t in &THETA_MODULI {
            let tau = TorusModulus::imaginary(t).expect("positive modulus");
            let pts = theta_points(&tau, 99, 100);
            let anti = pts.iter().map(|&z| rel_gap(theta(z + 1.0, &tau), -theta(z, &tau))).fold(0.0, f64::max);
            out.push(Check::below(format!("theta(z+1) = -theta(z), tau={t}i"), anti, tol::THETA));
        }
        let f = |z: Complex64| z * z + Complex64::new(0.0, 1.0) * z;
        let g = |z: Complex64| (z * 0.5).exp();
        let (a, b) = (Complex64::new(0.1, 0.2), Complex64::new(1.3, -0.4));
        let run = |h: &dyn Fn(Complex64) -> Complex64| integrate_segment(h, a, b, 0.0, 0.0, 1e-13).map(|r| r.value);
        match (run(&f), run(&g), run(&|z| f(z) * 2.0 + g(z) * 3.0)) {
            (Ok(x), Ok(y), Ok(s)) => out.push(Check::below("quadrature linearity", (s - x * 2.0 - y * 3.0).norm(), 1e-12)),
            _ => out.push(Check::failed("quadrature linearity", "integration failed")),
        }
    });
    vec![props, criterion_7(), criterion_10()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Paper,
    Properties,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Suite::Paper),
            "properties" => Ok(Suite::Properties),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite '{other}' (expected paper, properties or all)")),
        }
    }
}

pub fn run_suite(suite: Suite) -> Vec<CriterionReport> {
    match suite {
        Suite::Paper => paper_suite(),
        Suite::Properties => properties_suite(),
        Suite::All => {
            let mut v = properties_suite();
            v.retain(|r| r.id == 0);
            v.extend(paper_suite());
            v
        }
    }
}
