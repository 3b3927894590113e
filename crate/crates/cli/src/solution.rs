//! Plain-text solution records: `key=value` lines, `#` comments, one
//! `[record k]` section per solved parameter value.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use dihedral_core::periods::{DccwParams, DeParams, DksParams, Family, FamilyParams, SolutionRecord};
use dihedral_core::weierstrass::{growth_rate, DccwEnd};
use dihedral_core::TorusModulus;
use thiserror::Error;

pub const HEADER: &str = "# dihedral-forge solution";

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("record {record}: missing key '{key}'")]
    Missing { record: usize, key: &'static str },
    #[error("record {record}: bad value for '{key}': {msg}")]
    Value { record: usize, key: String, msg: String },
    #[error("file holds no records")]
    Empty,
}

/// One solved (or last attempted) parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub params: FamilyParams,
    pub residual: [f64; 2],
    pub residual_norm: f64,
    pub iterations: usize,
    pub solved: bool,
}

impl From<&SolutionRecord> for Record {
    fn from(r: &SolutionRecord) -> Self {
        Self {
            params: r.params,
            residual: r.residual.r,
            residual_norm: r.residual.norm,
            iterations: r.iterations,
            solved: r.solved,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub version: String,
    /// Seconds since the Unix epoch; ignored when comparing runs.
    pub timestamp: Option<u64>,
    pub records: Vec<Record>,
}

impl SolutionFile {
    pub fn new(records: Vec<Record>) -> Self {
        Self { version: env!("CARGO_PKG_VERSION").to_string(), timestamp: None, records }
    }

    pub fn stamped(mut self) -> Self {
        self.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        self
    }

    /// Canonical text form. Floats use the shortest representation that
    /// parses back to the same value.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "version={}", self.version);
        if let Some(t) = self.timestamp {
            let _ = writeln!(s, "timestamp={t}");
        }
        let _ = writeln!(s, "records={}", self.records.len());
        for (k, r) in self.records.iter().enumerate() {
            let _ = writeln!(s, "\n[record {k}]");
            let p = &r.params;
            let _ = writeln!(s, "family={}", p.family());
            let _ = writeln!(s, "alpha={:?}", p.alpha());
            match p {
                FamilyParams::De(d) => {
                    let _ = writeln!(s, "a={:?}\nb={:?}\nrho={:?}", d.a, d.b, d.rho);
                }
                FamilyParams::Dccw(d) => {
                    let (ga, gc) = (growth_rate(d, DccwEnd::A), growth_rate(d, DccwEnd::C));
                    let _ = writeln!(s, "a={:?}\nb={:?}\nc={:?}", d.a, d.b, d.c);
                    let _ = writeln!(s, "# derived\ngrowth_a={ga:?}\ngrowth_c={gc:?}");
                }
                FamilyParams::Dks(d) => {
                    let _ = writeln!(s, "tau={:?}\na={:?}\nc={:?}", d.tau.im(), d.a, d.c);
                    let _ = writeln!(s, "# derived\nb={:?}", d.b());
                }
            }
            let _ = writeln!(s, "residual={:?},{:?}", r.residual[0], r.residual[1]);
            let _ = writeln!(s, "residual_norm={:?}", r.residual_norm);
            let _ = writeln!(s, "iterations={}", r.iterations);
            let _ = writeln!(s, "solved={}", r.solved);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, SolutionError> {
        let mut version = None;
        let mut timestamp = None;
        let mut sections: Vec<Vec<(usize, String, String)>> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with("[record") && line.ends_with(']') {
                sections.push(Vec::new());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SolutionError::Syntax { line: n + 1, msg: format!("expected key=value, got '{line}'") })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            match sections.last_mut() {
                Some(sec) => sec.push((n + 1, key, value)),
                None => match key.as_str() {
                    "version" => version = Some(value),
                    "timestamp" => {
                        timestamp = Some(value.parse().map_err(|_| SolutionError::Syntax {
                            line: n + 1,
                            msg: format!("bad timestamp '{value}'"),
                        })?)
                    }
                    "records" => {}
                    _ => {
                        return Err(SolutionError::Syntax { line: n + 1, msg: format!("unknown header key '{key}'") })
                    }
                },
            }
        }
        if sections.is_empty() {
            return Err(SolutionError::Empty);
        }
        let records = sections.iter().enumerate().map(|(k, sec)| parse_record(k, sec)).collect::<Result<_, _>>()?;
        Ok(Self { version: version.unwrap_or_default(), timestamp, records })
    }

    pub fn read(path: &Path) -> Result<Self, SolutionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SolutionError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }
}

fn parse_record(record: usize, fields: &[(usize, String, String)]) -> Result<Record, SolutionError> {
    let get = |key: &'static str| {
        fields.iter().find(|f| f.1 == key).map(|f| f.2.as_str()).ok_or(SolutionError::Missing { record, key })
    };
    let num = |key: &'static str| -> Result<f64, SolutionError> {
        let v = get(key)?;
        v.parse::<f64>().map_err(|e| SolutionError::Value { record, key: key.into(), msg: e.to_string() })
    };
    let family = Family::from_str(get("family")?)
        .map_err(|e| SolutionError::Value { record, key: "family".into(), msg: e.to_string() })?;
    let alpha = num("alpha")?;
    let params = match family {
        Family::De => FamilyParams::De(DeParams { a: num("a")?, b: num("b")?, alpha, rho: num("rho")? }),
        Family::Dccw => FamilyParams::Dccw(DccwParams { a: num("a")?, b: num("b")?, c: num("c")?, alpha }),
        Family::Dks => {
            let tau = TorusModulus::imaginary(num("tau")?)
                .map_err(|e| SolutionError::Value { record, key: "tau".into(), msg: e.to_string() })?;
            FamilyParams::Dks(DksParams { a: num("a")?, c: num("c")?, tau, alpha })
        }
    };
    let residual = {
        let v = get("residual")?;
        let parts: Vec<&str> = v.split(',').collect();
        let bad = |msg: String| SolutionError::Value { record, key: "residual".into(), msg };
        if parts.len() != 2 {
            return Err(bad(format!("expected two components, got '{v}'")));
        }
        let p = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
        [p(parts[0])?, p(parts[1])?]
    };
    let iterations = get("iterations")?
        .parse()
        .map_err(|e: std::num::ParseIntError| SolutionError::Value { record, key: "iterations".into(), msg: e.to_string() })?;
    let solved = match get("solved")? {
        "true" => true,
        "false" => false,
        other => {
            return Err(SolutionError::Value { record, key: "solved".into(), msg: format!("expected true or false, got '{other}'") })
        }
    };
    Ok(Record { params, residual, residual_norm: num("residual_norm")?, iterations, solved })
}
