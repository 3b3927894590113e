use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dihedral_core::periods::Family;
use dihedral_forge::commands::{
    cmd_continue, cmd_mesh, cmd_solve, cmd_verify, uniform_schedule, write_report, CliError, ConfigFile,
    ContinueRequest, MeshRequest, SolveRequest, Symmetry, Tolerances, EXIT_CHECKS_FAILED, EXIT_OK, EXIT_USAGE,
};
use dihedral_forge::suites::Suite;
use dihedral_forge::THREADS_VAR;

#[derive(Parser)]
#[command(name = "dihedral-forge", version, about = "Solve, mesh and verify dihedralized minimal surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the period problem at one alpha.
    Solve(SolveArgs),
    /// Continue a solution along an alpha schedule (or an Im tau schedule for dks).
    Continue(ContinueArgs),
    /// Build a mesh from a solution file.
    Mesh(MeshArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// Newton acceptance tolerance on the residual norm.
    #[arg(long)]
    tol: Option<f64>,
    /// Quadrature tolerance.
    #[arg(long)]
    quad_tol: Option<f64>,
    /// Contour radius as a fraction of the distance to the nearest other root.
    #[arg(long)]
    radius_fraction: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// key=value file supplying defaults; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting unknowns (a,b for de and dccw, a,c for dks).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    init: Option<Vec<f64>>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Im tau (dks only).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ContinueArgs {
    #[arg(long)]
    family: Option<Family>,
    /// Explicit schedule, starting at 0.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with_all = ["alpha_max", "steps"])]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Im tau; several values sweep the modulus at fixed alpha (dks only).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    tau: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MeshArgs {
    /// Solution file written by solve or continue.
    solution: PathBuf,
    /// Record index (default: the last one).
    #[arg(long)]
    record: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    puncture_radius: Option<f64>,
    #[arg(long, default_value = "fundamental")]
    symmetry: Symmetry,
    /// Output path, .obj or .ply.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_RESOLUTION: usize = 48;

fn config(path: &Option<PathBuf>) -> Result<ConfigFile, CliError> {
    path.as_deref().map(ConfigFile::read).transpose().map(Option::unwrap_or_default)
}

fn tolerances(c: &Common, cfg: &ConfigFile) -> Result<Tolerances, CliError> {
    Tolerances { tol: c.tol, quad_tol: c.quad_tol, radius_fraction: c.radius_fraction, max_iterations: c.max_iterations }
        .merged(cfg)
}

fn family(flag: Option<Family>, cfg: &ConfigFile) -> Result<Family, CliError> {
    flag.or(cfg.get("family")?).ok_or_else(|| CliError::Usage("--family is required".into()))
}

fn list(raw: Option<&str>, key: &str) -> Result<Option<Vec<f64>>, CliError> {
    raw.map(|v| {
        v.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("config key {key}: {e}"))))
            .collect()
    })
    .transpose()
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(a) => {
            let cfg = config(&a.common.config)?;
            let req = SolveRequest {
                family: family(a.family, &cfg)?,
                alpha: a.alpha.or(cfg.get("alpha")?).unwrap_or(0.0),
                tau: a.tau.or(cfg.get("tau")?),
                init: a.common.init.clone(),
                tolerances: tolerances(&a.common, &cfg)?,
                out: a.out,
            };
            println!("{}", cmd_solve(&req)?);
        }
        Command::Continue(a) => {
            let cfg = config(&a.common.config)?;
            let alpha_max = a.alpha_max.or(cfg.get("alpha-max")?);
            let steps = a.steps.or(cfg.get("steps")?);
            let taus = a.tau.clone().or(list(cfg.raw("tau"), "tau")?).unwrap_or_default();
            let explicit = a.alpha.clone().or(if alpha_max.is_none() { list(cfg.raw("alpha"), "alpha")? } else { None });
            let alphas = match (explicit, alpha_max, steps) {
                (Some(s), _, _) => s,
                (None, Some(m), Some(n)) => uniform_schedule(m, n)?,
                (None, Some(_), None) | (None, None, Some(_)) => {
                    return Err(CliError::Usage("--alpha-max and --steps go together".into()))
                }
                (None, None, None) if taus.len() > 1 => vec![0.0],
                (None, None, None) => return Err(CliError::Usage("give --alpha or --alpha-max with --steps".into())),
            };
            let req = ContinueRequest {
                family: family(a.family, &cfg)?,
                alphas,
                taus,
                init: a.common.init.clone(),
                tolerances: tolerances(&a.common, &cfg)?,
                out: a.out,
            };
            print!("{}", cmd_continue(&req)?);
        }
        Command::Mesh(a) => {
            let cfg = config(&a.config)?;
            let req = MeshRequest {
                solution: a.solution,
                record: a.record,
                resolution: a.resolution.or(cfg.get("resolution")?).unwrap_or(DEFAULT_RESOLUTION),
                puncture_radius: a.puncture_radius.or(cfg.get("puncture-radius")?),
                symmetry: a.symmetry,
                out: a.out,
            };
            println!("{}", cmd_mesh(&req)?);
        }
        Command::Verify(a) => {
            let (report, pass) = cmd_verify(a.suite);
            print!("{report}");
            if let Some(path) = &a.out {
                write_report(path, &report)?;
            }
            return Ok(if pass { EXIT_OK } else { EXIT_CHECKS_FAILED });
        }
    }
    Ok(EXIT_OK)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return exit(e.exit_code());
    }
    match run(cli) {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.exit_code())
        }
    }
}
