//! The four subcommands, independent of argument parsing.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dihedral_core::builder::{
    build_fundamental_piece, dihedral_copies, extend_by_symmetry, sample_domain, FundamentalDomain, SurfaceMesh,
    SymmetryGroup, DEFAULT_PUNCTURE_RADIUS,
};
use dihedral_core::periods::{
    ContinuationResult, Family, FamilyParams, PeriodError, PeriodResidual, SolutionRecord, SolveOptions,
};
use dihedral_core::{continuation, solve_family, tau_continuation, TorusModulus};
use thiserror::Error;

use crate::export::{write_atomic, write_mesh, MeshFormat};
use crate::solution::{Record, SolutionFile};
use crate::suites::{default_init, run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_ARTIFACT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Largest alpha step taken when `solve` continues internally from 0.
pub const SOLVE_ALPHA_STEP: f64 = 0.02;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("bad input artifact: {0}")]
    Artifact(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Artifact(_) => EXIT_ARTIFACT,
            CliError::Io { .. } => EXIT_CHECKS_FAILED,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Optional `key=value` configuration; `#` starts a comment. Keys are the
/// long flag names without dashes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub const KEYS: [&'static str; 11] = [
        "family",
        "alpha",
        "alpha-max",
        "steps",
        "tau",
        "resolution",
        "tol",
        "quad-tol",
        "radius-fraction",
        "max-iterations",
        "puncture-radius",
    ];

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
            let k = k.trim().replace('_', "-");
            if !Self::KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key '{k}'", n + 1)));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("config key {key}: {e}"))))
            .transpose()
    }
}

/// Tolerances shared by `solve` and `continue`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tolerances {
    pub tol: Option<f64>,
    pub quad_tol: Option<f64>,
    pub radius_fraction: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl Tolerances {
    pub fn merged(self, cfg: &ConfigFile) -> Result<Self, CliError> {
        Ok(Self {
            tol: self.tol.or(cfg.get("tol")?),
            quad_tol: self.quad_tol.or(cfg.get("quad-tol")?),
            radius_fraction: self.radius_fraction.or(cfg.get("radius-fraction")?),
            max_iterations: self.max_iterations.or(cfg.get("max-iterations")?),
        })
    }

    pub fn solve_options(&self) -> Result<SolveOptions, CliError> {
        let mut opts = SolveOptions::default();
        if let Some(t) = self.tol {
            positive("tol", t)?;
            opts.newton.tol = t;
        }
        if let Some(t) = self.quad_tol {
            positive("quad-tol", t)?;
            opts.period.quad.tol = t;
        }
        if let Some(f) = self.radius_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::Usage(format!("radius-fraction must lie in (0, 1), got {f}")));
            }
            opts.period.radius_fraction = f;
        }
        if let Some(n) = self.max_iterations {
            if n == 0 {
                return Err(CliError::Usage("max-iterations must be positive".into()));
            }
            opts.newton.max_iterations = n;
        }
        Ok(opts)
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn modulus(t: f64) -> Result<TorusModulus, CliError> {
    TorusModulus::imaginary(t).map_err(|e| CliError::Usage(format!("tau: {e}")))
}

/// Checks the family/modulus combination and returns the starting point.
pub fn initial_params(family: Family, tau: Option<f64>, init: Option<&[f64]>) -> Result<FamilyParams, CliError> {
    if tau.is_some() && family != Family::Dks {
        return Err(CliError::Usage(format!("--tau applies to dks only, not {family}")));
    }
    let mut p = default_init(family);
    if let Some(x) = init {
        if x.len() != 2 {
            return Err(CliError::Usage(format!("--init takes two values, got {}", x.len())));
        }
        p = p.with_unknowns([x[0], x[1]], true);
    }
    if let (FamilyParams::Dks(d), Some(t)) = (&mut p, tau) {
        d.tau = modulus(t)?;
    }
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(p)
}

/// `n` equal steps from 0 to `alpha_max`.
pub fn uniform_schedule(alpha_max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    if !(alpha_max > 0.0 && alpha_max < 1.0) {
        return Err(CliError::Usage(format!("--alpha-max must lie in (0, 1), got {alpha_max}")));
    }
    Ok((0..=steps).map(|k| alpha_max * k as f64 / steps as f64).collect())
}

pub fn validate_schedule(s: &[f64]) -> Result<(), CliError> {
    if s.first() != Some(&0.0) {
        return Err(CliError::Usage("alpha schedule must start at 0".into()));
    }
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Usage("alpha schedule must be strictly increasing".into()));
    }
    if s.iter().any(|a| !(*a >= 0.0 && *a < 1.0)) {
        return Err(CliError::Usage("alpha values must lie in [0, 1)".into()));
    }
    Ok(())
}

/// Record for a failed attempt: the last Newton iterate, marked unsolved.
fn unsolved(start: &FamilyParams, alpha: f64, err: &PeriodError, opts: &SolveOptions) -> Record {
    let params = match err {
        PeriodError::Diverged { last, .. } | PeriodError::SingularJacobian { at: last, .. } => {
            start.with_alpha(alpha).with_unknowns(*last, opts.dccw_equal_growth)
        }
        _ => start.with_alpha(alpha),
    };
    let residual = params.residual(&opts.period).unwrap_or(PeriodResidual { r: [f64::NAN; 2], norm: f64::NAN });
    Record { params, residual: residual.r, residual_norm: residual.norm, iterations: 0, solved: false }
}

fn write_solution(path: &Path, file: &SolutionFile) -> Result<(), CliError> {
    let text = file.serialize();
    write_atomic(path, |w| w.write_all(text.as_bytes())).map_err(io_err(format!("writing {}", path.display())))
}

fn describe(p: &FamilyParams) -> String {
    match p {
        FamilyParams::De(d) => format!("a={:.9} b={:.9} rho={:.9}", d.a, d.b, d.rho),
        FamilyParams::Dccw(d) => format!("a={:.9} b={:.9} c={:.9}", d.a, d.b, d.c),
        FamilyParams::Dks(d) => format!("tau={:.4}i a={:.9} c={:.9} b={:.9}", d.tau.im(), d.a, d.c, d.b()),
    }
}

pub struct SolveRequest {
    pub family: Family,
    pub alpha: f64,
    pub tau: Option<f64>,
    pub init: Option<Vec<f64>>,
    pub tolerances: Tolerances,
    pub out: PathBuf,
}

/// Solves at one `alpha`; for `alpha > 0` the branch is continued from 0 in
/// steps of at most [`SOLVE_ALPHA_STEP`]. Writes one record.
pub fn cmd_solve(req: &SolveRequest) -> Result<String, CliError> {
    if !(req.alpha >= 0.0 && req.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in [0, 1), got {}", req.alpha)));
    }
    let opts = req.tolerances.solve_options()?;
    let init = initial_params(req.family, req.tau, req.init.as_deref())?;
    let outcome: Result<SolutionRecord, (f64, FamilyParams, PeriodError)> = if req.alpha == 0.0 {
        solve_family(req.family, 0.0, None, &init, &opts).map_err(|e| (0.0, init, e))
    } else {
        let steps = (req.alpha / SOLVE_ALPHA_STEP).ceil().max(1.0) as usize;
        let schedule: Vec<f64> = (0..=steps).map(|k| req.alpha * k as f64 / steps as f64).collect();
        match continuation(req.family, &schedule, None, &init, &opts) {
            Ok(ContinuationResult { records, failure: None }) => Ok(*records.last().expect("schedule solved")),
            Ok(ContinuationResult { records, failure: Some((at, e)) }) => {
                Err((at, records.last().map(|r| r.params).unwrap_or(init), e))
            }
            Err(e) => Err((0.0, init, e)),
        }
    };
    match outcome {
        Ok(rec) => {
            write_solution(&req.out, &SolutionFile::new(vec![Record::from(&rec)]).stamped())?;
            Ok(format!(
                "solved {} alpha={} {} residual={:.3e} iterations={}",
                req.family,
                req.alpha,
                describe(&rec.params),
                rec.residual.norm,
                rec.iterations
            ))
        }
        Err((at, from, e)) => {
            let rec = unsolved(&from, at, &e, &opts);
            write_solution(&req.out, &SolutionFile::new(vec![rec]).stamped())?;
            Err(CliError::Solver(format!("{} at alpha={at}: {e} (last iterate written to {})", req.family, req.out.display())))
        }
    }
}

pub struct ContinueRequest {
    pub family: Family,
    /// `alpha` schedule; a single value when sweeping `tau`.
    pub alphas: Vec<f64>,
    /// `Im tau` values; more than one means a modulus sweep at fixed `alpha`.
    pub taus: Vec<f64>,
    pub init: Option<Vec<f64>>,
    pub tolerances: Tolerances,
    pub out: PathBuf,
}

/// Runs a branch, writes one record per reached parameter value and returns
/// the summary table. A partial branch is a success.
pub fn cmd_continue(req: &ContinueRequest) -> Result<String, CliError> {
    let opts = req.tolerances.solve_options()?;
    let tau_sweep = req.taus.len() > 1;
    if tau_sweep && req.family != Family::Dks {
        return Err(CliError::Usage(format!("--tau applies to dks only, not {}", req.family)));
    }
    // a sweep is anchored at the value nearest the starting modulus i
    let start_tau = if tau_sweep { None } else { req.taus.first().copied() };
    let init = initial_params(req.family, start_tau, req.init.as_deref())?;
    let result = if tau_sweep {
        let alpha = match req.alphas.as_slice() {
            [] => 0.0,
            [a] => *a,
            _ => return Err(CliError::Usage("a tau sweep takes a single --alpha".into())),
        };
        if req.taus.windows(2).any(|w| !(w[1] > w[0])) || req.taus[0] <= 0.0 {
            return Err(CliError::Usage("tau schedule must be positive and strictly increasing".into()));
        }
        let FamilyParams::Dks(p) = init else {
            return Err(CliError::Usage("--tau applies to dks only".into()));
        };
        tau_continuation(alpha, &req.taus, &p, &opts)
    } else {
        validate_schedule(&req.alphas)?;
        continuation(req.family, &req.alphas, None, &init, &opts)
    };
    let result = result.map_err(|e| CliError::Solver(format!("{}: no point of the branch solved: {e}", req.family)))?;
    let records: Vec<Record> = result.records.iter().map(Record::from).collect();
    write_solution(&req.out, &SolutionFile::new(records).stamped())?;

    let mut s = String::new();
    let label = if tau_sweep { "Im tau" } else { "alpha" };
    let _ = writeln!(s, "{:>12}  {:<60} {:>10} {:>5}", label, "parameters", "residual", "iter");
    for r in &result.records {
        let at = r.step.map(|x| x.parameter).unwrap_or(f64::NAN);
        let _ = writeln!(s, "{at:>12.6}  {:<60} {:>10.3e} {:>5}", describe(&r.params), r.residual.norm, r.iterations);
    }
    if tau_sweep && result.records.len() > 1 {
        let a: Vec<f64> = result.records.iter().map(|r| r.params.unknowns()[0]).collect();
        let trend = if a.windows(2).all(|w| w[1] > w[0]) {
            "increasing"
        } else if a.windows(2).all(|w| w[1] < w[0]) {
            "decreasing"
        } else {
            "not monotone"
        };
        let _ = writeln!(s, "a is {trend} in Im tau");
    }
    let last = result.last_solved().map_or_else(|| "nothing".to_string(), |x| x.to_string());
    match &result.failure {
        Some((at, e)) => {
            let _ = writeln!(s, "branch stopped before {at}: {e}; last reached {last}");
        }
        None => {
            let _ = writeln!(s, "branch complete, last reached {last}");
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Fundamental,
    Wedge,
    Full,
}

impl std::str::FromStr for Symmetry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fundamental" => Ok(Symmetry::Fundamental),
            "wedge" => Ok(Symmetry::Wedge),
            "full" => Ok(Symmetry::Full),
            other => Err(format!("unknown symmetry '{other}' (expected fundamental, wedge or full)")),
        }
    }
}

/// The symmetry group for a family: the wedge mirror is the plane through
/// the axis, the full extension the dihedral group of order `2n`.
pub fn symmetry_group(family: Family, alpha: f64, symmetry: Symmetry) -> Result<SymmetryGroup, CliError> {
    let (first, second) = match family {
        Family::Dks => ("V0", "V1"),
        _ => ("A", "B"),
    };
    match symmetry {
        Symmetry::Fundamental => Ok(SymmetryGroup::identity()),
        Symmetry::Wedge => Ok(SymmetryGroup::wedge(first)),
        Symmetry::Full => {
            let copies = dihedral_copies(alpha)
                .ok_or_else(|| CliError::Usage(format!("full extension needs alpha = 1/n, got {alpha}")))?;
            Ok(SymmetryGroup::generated(&[first, second], copies))
        }
    }
}

pub struct MeshRequest {
    pub solution: PathBuf,
    pub record: Option<usize>,
    pub resolution: usize,
    pub puncture_radius: Option<f64>,
    pub symmetry: Symmetry,
    pub out: PathBuf,
}

pub fn build_mesh(params: &FamilyParams, resolution: usize, puncture_radius: f64, symmetry: Symmetry) -> Result<SurfaceMesh, CliError> {
    let data = params.weierstrass_data().map_err(|e| CliError::Artifact(e.to_string()))?;
    let domain = FundamentalDomain::for_data(&data);
    let grid = sample_domain(&domain, resolution, puncture_radius).map_err(|e| CliError::Usage(e.to_string()))?;
    let (mesh, _) = build_fundamental_piece(&data, &domain, &grid).map_err(|e| CliError::Solver(e.to_string()))?;
    let group = symmetry_group(params.family(), params.alpha(), symmetry)?;
    if group.reflections.is_empty() {
        return Ok(mesh);
    }
    extend_by_symmetry(&mesh, &group).map_err(|e| CliError::Solver(e.to_string()))
}

pub fn cmd_mesh(req: &MeshRequest) -> Result<String, CliError> {
    let format = MeshFormat::from_path(&req.out)
        .ok_or_else(|| CliError::Usage(format!("{}: output must end in .obj or .ply", req.out.display())))?;
    let file = SolutionFile::read(&req.solution).map_err(|e| CliError::Artifact(e.to_string()))?;
    let k = req.record.unwrap_or(file.records.len() - 1);
    let rec = file
        .records
        .get(k)
        .ok_or_else(|| CliError::Usage(format!("record {k} out of range (file has {})", file.records.len())))?;
    if !rec.solved {
        return Err(CliError::Artifact(format!("record {k} of {} is not solved", req.solution.display())));
    }
    rec.params.validate().map_err(|e| CliError::Artifact(e.to_string()))?;
    let radius = req.puncture_radius.unwrap_or(DEFAULT_PUNCTURE_RADIUS);
    let mesh = build_mesh(&rec.params, req.resolution, radius, req.symmetry)?;
    write_mesh(&mesh, &req.out, format).map_err(io_err(format!("writing {}", req.out.display())))?;
    Ok(format!(
        "{} alpha={}: {} vertices, {} triangles, {} copies, euler characteristic {}, {} boundary loops -> {}",
        rec.params.family(),
        rec.params.alpha(),
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.copies,
        mesh.euler_characteristic(),
        mesh.boundary_loops(),
        req.out.display()
    ))
}

/// Runs a suite; returns the report text and whether every check passed.
pub fn cmd_verify(suite: Suite) -> (String, bool) {
    let reports = run_suite(suite);
    let mut s = String::new();
    for r in &reports {
        for c in &r.checks {
            let _ = writeln!(s, "criterion={}\t{c}", r.id);
        }
        let _ = writeln!(s, "{}", r.line());
    }
    let all = reports.iter().all(|r| r.pass());
    let passed = reports.iter().filter(|r| r.pass()).count();
    let _ = writeln!(s, "{} {passed}/{} criteria passed", if all { "PASS" } else { "FAIL" }, reports.len());
    (s, all)
}

pub fn write_report(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |w| w.write_all(text.as_bytes())).map_err(io_err(format!("writing {}", path.display())))
}
