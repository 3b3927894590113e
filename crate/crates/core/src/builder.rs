//! Meshes of the fundamental piece, symmetric extension and the geometric checks.
//!
//! The parameter domain is sampled on a tensor grid that contains every
//! branch point as a node and is graded towards the punctures. Positions are
//! integrated along a spanning tree of grid edges; the remaining edges give a
//! path-independence check for free.

use std::collections::{HashMap, VecDeque};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::periods::PeriodError;
use crate::quadrature::{integrate_along, PathSegment, QuadratureConfig};
use crate::theta::TorusModulus;
use crate::weierstrass::{normal_from_gauss, omega_from_values, FormError, FormSource, WeierstrassData};

/// Default radius of the disks cut out around ends.
pub const DEFAULT_PUNCTURE_RADIUS: f64 = 1e-2;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BuildError {
    #[error("resolution {0} is below the minimum of 8")]
    Resolution(usize),
    #[error("puncture disks around {0} and {1} overlap")]
    OverlappingPunctures(Complex64, Complex64),
    #[error("puncture radius {0} must be positive")]
    PunctureRadius(f64),
    #[error("no regular grid point near the base point {0}")]
    BadBase(Complex64),
    #[error("periods do not close: weld gap {max_gap:.3e} on plane {plane} exceeds {tol:.3e}")]
    PeriodClosure { plane: String, max_gap: f64, tol: f64 },
    #[error("mesh has no plane group named {0}")]
    UnknownPlane(String),
    #[error("plane group {0} has too few vertices to fit a plane")]
    UnderdeterminedPlane(String),
    #[error(transparent)]
    Period(#[from] PeriodError),
    #[error(transparent)]
    Form(#[from] FormError),
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    UpperHalfPlane,
    QuarterTorus(TorusModulus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceKind {
    VerticalPlane,
    HorizontalPlane,
}

/// A straight piece of the domain boundary mapped into one symmetry plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPiece {
    pub tag: String,
    pub start: Complex64,
    pub end: Complex64,
    pub kind: PieceKind,
}

/// Boundary pieces whose images lie in one common plane once the periods close.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneGroup {
    pub name: String,
    pub tags: Vec<String>,
    pub kind: PieceKind,
}

/// Truncated parameter domain with its ends, corners and symmetry boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDomain {
    pub kind: DomainKind,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Ends; cut out with a disk.
    pub punctures: Vec<Complex64>,
    /// Integrable branch points with the endpoint exponents of
    /// `(G dh, dh/G, dh)` there; kept as grid nodes.
    pub vertices: Vec<(Complex64, [f64; 3])>,
    pub base: Complex64,
    pub pieces: Vec<BoundaryPiece>,
    pub planes: Vec<PlaneGroup>,
}

/// Exponents of `(G dh, dh/G, dh)` at `z`.
pub fn form_exponents(data: &WeierstrassData, z: Complex64) -> [f64; 3] {
    match &data.source {
        FormSource::HalfPlane { phi1, phi2, dh } => {
            if z.im != 0.0 {
                return [0.0; 3];
            }
            [phi1.exponent_at(z.re), phi2.exponent_at(z.re), dh.exponent_at(z.re)]
        }
        FormSource::Torus { g, dh } => {
            let (go, d) = (g.order_at(z), dh.order_at(z));
            [go + d, d - go, d]
        }
    }
}

enum PointType {
    Regular,
    Vertex([f64; 3]),
    Puncture,
}

fn point_type(exps: [f64; 3]) -> PointType {
    let lowest = exps.iter().copied().fold(0.0, f64::min);
    if lowest <= -1.0 + 1e-12 {
        PointType::Puncture
    } else if lowest < 0.0 || exps.iter().any(|e| (e - e.round()).abs() > 1e-12) {
        // integer exponents need no weight
        PointType::Vertex(exps.map(|e| if (e - e.round()).abs() > 1e-12 { e } else { 0.0 }))
    } else {
        PointType::Regular
    }
}

impl FundamentalDomain {
    /// Plain rectangle in the upper half-plane with no special points.
    pub fn rectangle(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let base = cx(0.5 * (x_range.0 + x_range.1), 0.5 * (y_range.0 + y_range.1));
        Self {
            kind: DomainKind::UpperHalfPlane,
            x_range,
            y_range,
            punctures: Vec::new(),
            vertices: Vec::new(),
            base,
            pieces: Vec::new(),
            planes: Vec::new(),
        }
    }

    /// Domain of the given Weierstrass data: the box `[-R, R] x [0, R]` with
    /// `R` two beyond the outermost root for half-plane data, the quarter
    /// rectangle `[0, 1/2] x [0, Im tau / 2]` for torus data.
    pub fn for_data(data: &WeierstrassData) -> Self {
        match &data.source {
            FormSource::HalfPlane { phi1, phi2, dh } => {
                let mut roots: Vec<f64> =
                    phi1.factors().iter().chain(phi2.factors()).chain(dh.factors()).map(|f| f.0).collect();
                roots.sort_by(f64::total_cmp);
                roots.dedup();
                let r = roots.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 2.0;
                let mut punctures = Vec::new();
                let mut vertices = Vec::new();
                for &x in &roots {
                    match point_type(form_exponents(data, cx(x, 0.0))) {
                        PointType::Puncture => punctures.push(cx(x, 0.0)),
                        PointType::Vertex(w) => vertices.push((cx(x, 0.0), w)),
                        PointType::Regular => {}
                    }
                }
                let mut breaks: Vec<f64> = punctures.iter().chain(vertices.iter().map(|v| &v.0)).map(|z| z.re).collect();
                breaks.sort_by(f64::total_cmp);
                let mut ends = vec![-r];
                ends.extend(breaks);
                ends.push(r);
                let mut pieces = Vec::new();
                let (mut a_tags, mut b_tags) = (Vec::new(), Vec::new());
                for (k, w) in ends.windows(2).enumerate() {
                    let tag = format!("{}{k}", if k % 2 == 0 { "B" } else { "A" });
                    if k % 2 == 0 { b_tags.push(tag.clone()) } else { a_tags.push(tag.clone()) }
                    pieces.push(BoundaryPiece {
                        tag,
                        start: cx(w[0], 0.0),
                        end: cx(w[1], 0.0),
                        kind: PieceKind::VerticalPlane,
                    });
                }
                let planes = vec![
                    PlaneGroup { name: "A".into(), tags: a_tags, kind: PieceKind::VerticalPlane },
                    PlaneGroup { name: "B".into(), tags: b_tags, kind: PieceKind::VerticalPlane },
                ];
                Self {
                    kind: DomainKind::UpperHalfPlane,
                    x_range: (-r, r),
                    y_range: (0.0, r),
                    punctures,
                    vertices,
                    base: cx(0.0, 0.5 * r),
                    pieces,
                    planes,
                }
            }
            FormSource::Torus { g, dh } => {
                let tau = *g.modulus();
                let top = 0.5 * tau.im();
                let inside = |z: Complex64| z.re >= -1e-12 && z.re <= 0.5 + 1e-12 && z.im >= -1e-12 && z.im <= top + 1e-12;
                let mut cands: Vec<Complex64> = Vec::new();
                let mut shifts: Vec<Complex64> =
                    g.theta_factors().iter().chain(dh.theta_factors()).map(|f| f.0).collect();
                if let Some(b) = g.bracket() {
                    shifts.push(cx(b.zero, 0.0));
                    shifts.push(cx(b.pole, 0.0));
                }
                for s in shifts {
                    for m in -1..=1 {
                        for k in -1..=1 {
                            let z = s + tau.tau() * m as f64 + k as f64;
                            let z = cx(z.re.clamp(0.0, 0.5), z.im.clamp(0.0, top));
                            if inside(s + tau.tau() * m as f64 + k as f64) && !cands.iter().any(|c| (c - z).norm() < 1e-12) {
                                cands.push(z);
                            }
                        }
                    }
                }
                let mut punctures = Vec::new();
                let mut vertices = Vec::new();
                for z in cands {
                    match point_type(form_exponents(data, z)) {
                        PointType::Puncture => punctures.push(z),
                        PointType::Vertex(w) => vertices.push((z, w)),
                        PointType::Regular => {}
                    }
                }
                // the bottom splits at the bracket point, the left side at the end
                let split_x = g.bracket().map(|b| b.pole.min(b.zero).rem_euclid(1.0).min(0.5)).unwrap_or(0.25);
                let split_y = punctures
                    .iter()
                    .chain(vertices.iter().map(|v| &v.0))
                    .find(|z| z.re.abs() < 1e-12 && z.im > 0.0 && z.im < top)
                    .map(|z| z.im)
                    .unwrap_or(0.5 * top);
                let piece = |tag: &str, s: Complex64, e: Complex64, kind| BoundaryPiece { tag: tag.into(), start: s, end: e, kind };
                use PieceKind::*;
                let pieces = vec![
                    piece("dl", cx(0.0, 0.0), cx(split_x, 0.0), VerticalPlane),
                    piece("dr", cx(split_x, 0.0), cx(0.5, 0.0), VerticalPlane),
                    piece("r", cx(0.5, 0.0), cx(0.5, top), HorizontalPlane),
                    piece("u", cx(0.5, top), cx(0.0, top), VerticalPlane),
                    piece("lu", cx(0.0, top), cx(0.0, split_y), HorizontalPlane),
                    piece("ld", cx(0.0, split_y), cx(0.0, 0.0), HorizontalPlane),
                ];
                let group = |n: &str, tags: &[&str], kind| PlaneGroup {
                    name: n.into(),
                    tags: tags.iter().map(|t| t.to_string()).collect(),
                    kind,
                };
                let planes = vec![
                    group("V0", &["dl"], VerticalPlane),
                    group("V1", &["dr", "u"], VerticalPlane),
                    group("H0", &["ld"], HorizontalPlane),
                    group("H1", &["lu", "r"], HorizontalPlane),
                ];
                Self {
                    kind: DomainKind::QuarterTorus(tau),
                    x_range: (0.0, 0.5),
                    y_range: (0.0, top),
                    punctures,
                    vertices,
                    base: cx(0.25, 0.5 * top),
                    pieces,
                    planes,
                }
            }
        }
    }

    /// Tag of the boundary piece containing the parameter segment `[p, q]`.
    pub fn piece_of(&self, p: Complex64, q: Complex64) -> Option<&BoundaryPiece> {
        let scale = (self.x_range.1 - self.x_range.0).max(self.y_range.1 - self.y_range.0);
        let on = |piece: &BoundaryPiece, z: Complex64| {
            let d = piece.end - piece.start;
            let t = ((z - piece.start) * d.conj()).re / d.norm_sqr();
            let foot = piece.start + d * t.clamp(0.0, 1.0);
            (z - foot).norm() <= 1e-12 * scale && (-1e-12..=1.0 + 1e-12).contains(&t)
        };
        self.pieces.iter().find(|piece| on(piece, p) && on(piece, q))
    }

    fn on_outer_box(&self, p: Complex64, q: Complex64) -> bool {
        let scale = (self.x_range.1 - self.x_range.0).max(self.y_range.1 - self.y_range.0);
        let eps = 1e-12 * scale;
        let same = |f: fn(Complex64) -> f64, v: f64| (f(p) - v).abs() < eps && (f(q) - v).abs() < eps;
        same(|z| z.re, self.x_range.0) || same(|z| z.re, self.x_range.1) || same(|z| z.im, self.y_range.1)
            || (matches!(self.kind, DomainKind::QuarterTorus(_)) && same(|z| z.im, self.y_range.0))
    }

}

/// Grid nodes, validity and the integration tree.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `points[j * xs.len() + i] = xs[i] + i ys[j]`.
    pub points: Vec<Complex64>,
    pub valid: Vec<bool>,
    /// Endpoint exponents of the three forms used for edges touching a node
    /// (non-zero at branch points).
    pub weights: Vec<[f64; 3]>,
    pub root: usize,
    /// `(parent, child)` in breadth-first order from the root.
    pub tree: Vec<(usize, usize)>,
    /// Valid grid edges not in the tree.
    pub extra_edges: Vec<(usize, usize)>,
    pub puncture_radius: f64,
}

impl DomainGrid {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }
}

/// Uniform nodes, plus the given special coordinates, plus geometric grading
/// towards the graded coordinates.
fn axis_nodes(lo: f64, hi: f64, n: usize, special: &[f64], graded: &[f64], radius: f64) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let mut prio: Vec<f64> = special.iter().copied().filter(|s| *s >= lo && *s <= hi).collect();
    for &g in graded {
        let mut d = 2.0 * radius;
        while d < 0.5 * h {
            for s in [g - d, g + d] {
                if s > lo && s < hi {
                    prio.push(s);
                }
            }
            d *= 2.0;
        }
    }
    prio.push(lo);
    prio.push(hi);
    prio.sort_by(f64::total_cmp);
    prio.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
    let mut out: Vec<f64> = (0..=n)
        .map(|k| lo + h * k as f64)
        .filter(|x| prio.iter().all(|p| (x - p).abs() >= 0.25 * h))
        .collect();
    out.extend(prio);
    out.sort_by(f64::total_cmp);
    out
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    if d.norm_sqr() == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn rect_distance(p: Complex64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let dx = (x0 - p.re).max(0.0).max(p.re - x1);
    let dy = (y0 - p.im).max(0.0).max(p.im - y1);
    dx.hypot(dy)
}

/// Tensor grid over the domain with `resolution` uniform cells per side, the
/// special points inserted as nodes and grading towards the punctures.
pub fn sample_domain(
    domain: &FundamentalDomain,
    resolution: usize,
    puncture_radius: f64,
) -> Result<DomainGrid, BuildError> {
    if resolution < 8 {
        return Err(BuildError::Resolution(resolution));
    }
    if !(puncture_radius > 0.0) {
        return Err(BuildError::PunctureRadius(puncture_radius));
    }
    for (k, p) in domain.punctures.iter().enumerate() {
        for q in &domain.punctures[k + 1..] {
            if (p - q).norm() < 2.0 * puncture_radius {
                return Err(BuildError::OverlappingPunctures(*p, *q));
            }
        }
    }
    let specials: Vec<Complex64> =
        domain.punctures.iter().copied().chain(domain.vertices.iter().map(|v| v.0)).chain([domain.base]).collect();
    let mut sx: Vec<f64> = specials.iter().map(|z| z.re).collect();
    let sy: Vec<f64> = specials.iter().map(|z| z.im).collect();
    if domain.kind == DomainKind::UpperHalfPlane && domain.x_range.0 < 0.0 && domain.x_range.1 > 0.0 {
        sx.push(0.0);
    }
    let gx: Vec<f64> = domain.punctures.iter().map(|z| z.re).collect();
    let gy: Vec<f64> = domain.punctures.iter().map(|z| z.im).collect();
    let xs = axis_nodes(domain.x_range.0, domain.x_range.1, resolution, &sx, &gx, puncture_radius);
    let ys = axis_nodes(domain.y_range.0, domain.y_range.1, resolution, &sy, &gy, puncture_radius);
    let (nx, ny) = (xs.len(), ys.len());
    let mut points = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            points.push(cx(x, y));
        }
    }
    let mut valid: Vec<bool> =
        points.iter().map(|z| domain.punctures.iter().all(|p| (z - p).norm() >= puncture_radius)).collect();
    let weights: Vec<[f64; 3]> = points
        .iter()
        .map(|z| domain.vertices.iter().find(|v| (v.0 - z).norm() < 1e-12).map(|v| v.1).unwrap_or([0.0; 3]))
        .collect();
    let edge_ok = |a: usize, b: usize, valid: &[bool]| {
        valid[a]
            && valid[b]
            && domain.punctures.iter().all(|p| segment_distance(*p, points[a], points[b]) >= puncture_radius)
    };
    let root = (0..points.len())
        .filter(|&k| valid[k] && weights[k] == [0.0; 3])
        .min_by(|&a, &b| (points[a] - domain.base).norm().total_cmp(&(points[b] - domain.base).norm()))
        .ok_or(BuildError::BadBase(domain.base))?;
    let neighbours = |k: usize| {
        let (i, j) = (k % nx, k / nx);
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push(k - 1);
        }
        if i + 1 < nx {
            out.push(k + 1);
        }
        if j > 0 {
            out.push(k - nx);
        }
        if j + 1 < ny {
            out.push(k + nx);
        }
        out
    };
    let mut seen = vec![false; points.len()];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    let mut tree = Vec::new();
    while let Some(k) = queue.pop_front() {
        for n in neighbours(k) {
            if !seen[n] && edge_ok(k, n, &valid) {
                seen[n] = true;
                tree.push((k, n));
                queue.push_back(n);
            }
        }
    }
    for (v, s) in valid.iter_mut().zip(&seen) {
        *v &= *s;
    }
    let in_tree: std::collections::HashSet<(usize, usize)> =
        tree.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut extra_edges = Vec::new();
    for k in 0..points.len() {
        for n in neighbours(k) {
            if n > k && edge_ok(k, n, &valid) && !in_tree.contains(&(k, n)) {
                extra_edges.push((k, n));
            }
        }
    }
    Ok(DomainGrid { xs, ys, points, valid, weights, root, tree, extra_edges, puncture_radius })
}

/// `Re int_a^b (w1, w2, w3)` along a straight edge. At branch points each of
/// `G dh`, `dh/G`, `dh` is integrated against its own algebraic endpoint weight.
pub fn edge_displacement(
    data: &WeierstrassData,
    a: Complex64,
    b: Complex64,
    wa: [f64; 3],
    wb: [f64; 3],
    cfg: &QuadratureConfig,
) -> Result<[f64; 3], BuildError> {
    let nan = cx(f64::NAN, f64::NAN);
    let values = if wa == [0.0; 3] && wb == [0.0; 3] {
        integrate_along(|z| data.values(z).unwrap_or([nan; 3]), &PathSegment::line(a, b), cfg)
            .map_err(FormError::from)?
            .value
    } else {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for k in 0..3 {
            let seg = PathSegment::Line { start: a, end: b, exp_start: wa[k], exp_end: wb[k] };
            let r = integrate_along(
                |z| {
                    let w = (z - a).norm().powf(wa[k]) * (b - z).norm().powf(wb[k]);
                    data.values(z).map(|v| v[k] / w).unwrap_or(nan)
                },
                &seg,
                cfg,
            )
            .map_err(FormError::from)?;
            out[k] = r.value;
        }
        out
    };
    let w = omega_from_values(values);
    Ok([w[0].re, w[1].re, w[2].re])
}

/// Triangle mesh with per-vertex parameter and Gauss map value.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub params: Vec<Complex64>,
    pub gauss: Vec<Complex64>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges with the tag of the piece they lie on, `cut` for the
    /// truncation box and `end` around punctures.
    pub boundary: Vec<([usize; 2], String)>,
    pub planes: Vec<PlaneGroup>,
    /// Nominal unit normal of each plane group.
    pub nominal_normals: HashMap<String, [f64; 3]>,
    pub copies: usize,
}

/// Build statistics of the fundamental piece.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    /// Largest disagreement between a non-tree edge integral and the
    /// difference of its endpoint positions.
    pub path_mismatch: f64,
    pub failed_edges: usize,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

impl SurfaceMesh {
    pub fn diameter(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        norm(sub(hi, lo))
    }

    /// Vertex indices on boundary edges carrying any of `tags`.
    pub fn tagged_vertices(&self, tags: &[String]) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.boundary.iter().filter(|(_, t)| tags.contains(t)).flat_map(|(e, _)| e.iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// `V - E + F` over vertices used by triangles.
    pub fn euler_characteristic(&self) -> i64 {
        let edges = self.edge_counts();
        let mut used: Vec<usize> = self.triangles.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        used.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Number of closed boundary loops (edges used by one triangle).
    pub fn boundary_loops(&self) -> usize {
        let edges = self.edge_counts();
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&(a, b), &n) in &edges {
            if n == 1 {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
        }
        let mut seen: std::collections::HashSet<usize> = std::collections::HashSet::new();
        let mut loops = 0;
        let mut keys: Vec<usize> = adj.keys().copied().collect();
        keys.sort_unstable();
        for s in keys {
            if !seen.insert(s) {
                continue;
            }
            loops += 1;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &adj[&v] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        loops
    }

    fn triangle_area(&self, t: [usize; 3]) -> f64 {
        let [a, b, c] = t.map(|k| self.vertices[k]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    /// Every triangle has positive area.
    pub fn has_degenerate_triangles(&self) -> bool {
        self.triangles.iter().any(|&t| !(self.triangle_area(t) > 0.0))
    }
}

fn gauss_near(data: &WeierstrassData, z: Complex64, toward: Complex64) -> Complex64 {
    match data.gauss(z) {
        Ok(g) if g.re.is_finite() && g.im.is_finite() => g,
        _ => {
            let nudge = z + (toward - z) * 1e-9;
            data.gauss(nudge).unwrap_or(cx(f64::INFINITY, f64::INFINITY))
        }
    }
}

/// Angle of the vertical plane through a boundary piece, from the phase of `G` there.
fn piece_normal(data: &WeierstrassData, domain: &FundamentalDomain, piece: &BoundaryPiece) -> Option<[f64; 3]> {
    if piece.kind == PieceKind::HorizontalPlane {
        return Some([0.0, 0.0, 1.0]);
    }
    for t in [0.5, 0.37, 0.61] {
        let z = piece.start + (piece.end - piece.start) * t;
        let g = gauss_near(data, z, domain.base);
        if g.norm() > 1e-8 && g.norm() < 1e8 {
            let th = g.arg();
            return Some([-th.sin(), th.cos(), 0.0]);
        }
    }
    None
}

/// Integrates the minimal map over the grid and triangulates it.
pub fn build_fundamental_piece(
    data: &WeierstrassData,
    domain: &FundamentalDomain,
    grid: &DomainGrid,
) -> Result<(SurfaceMesh, BuildReport), BuildError> {
    let cfg = QuadratureConfig::with_tol(1e-12);
    let pts = &grid.points;
    let disp = |a: usize, b: usize| edge_displacement(data, pts[a], pts[b], grid.weights[a], grid.weights[b], &cfg);
    let steps: Vec<Result<[f64; 3], BuildError>> = grid.tree.par_iter().map(|&(a, b)| disp(a, b)).collect();
    let mut pos: Vec<Option<[f64; 3]>> = vec![None; pts.len()];
    pos[grid.root] = Some([0.0; 3]);
    let mut failed_edges = 0;
    for (&(a, b), step) in grid.tree.iter().zip(&steps) {
        match (pos[a], step) {
            (Some(pa), Ok(d)) => pos[b] = Some([pa[0] + d[0], pa[1] + d[1], pa[2] + d[2]]),
            (_, Err(_)) => failed_edges += 1,
            _ => {}
        }
    }
    let path_mismatch = grid
        .extra_edges
        .par_iter()
        .filter_map(|&(a, b)| {
            let (pa, pb) = (pos[a]?, pos[b]?);
            let d = disp(a, b).ok()?;
            Some(norm(sub(sub(pb, pa), d)))
        })
        .reduce(|| 0.0, f64::max);

    let mut index = vec![usize::MAX; pts.len()];
    let mut vertices = Vec::new();
    let mut params = Vec::new();
    let mut gauss = Vec::new();
    for k in 0..pts.len() {
        if let (true, Some(p)) = (grid.valid[k], pos[k]) {
            index[k] = vertices.len();
            vertices.push(p);
            params.push(pts[k]);
            gauss.push(gauss_near(data, pts[k], domain.base));
        }
    }
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let mut triangles = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [grid.index(i, j), grid.index(i + 1, j), grid.index(i + 1, j + 1), grid.index(i, j + 1)];
            if c.iter().any(|&k| index[k] == usize::MAX) {
                continue;
            }
            let hit = domain.punctures.iter().any(|p| {
                rect_distance(*p, grid.xs[i], grid.xs[i + 1], grid.ys[j], grid.ys[j + 1]) < grid.puncture_radius
            });
            if hit {
                continue;
            }
            triangles.push([index[c[0]], index[c[1]], index[c[2]]]);
            triangles.push([index[c[0]], index[c[2]], index[c[3]]]);
        }
    }
    let mut mesh = SurfaceMesh {
        vertices,
        params,
        gauss,
        triangles,
        boundary: Vec::new(),
        planes: domain.planes.clone(),
        nominal_normals: HashMap::new(),
        copies: 1,
    };
    let diam = mesh.diameter();
    mesh.triangles.retain(|&t| mesh_area_ok(&mesh.vertices, t, diam));
    let mut counts: Vec<((usize, usize), usize)> = mesh.edge_counts().into_iter().collect();
    counts.sort_unstable();
    for ((a, b), n) in counts {
        if n != 1 {
            continue;
        }
        let (pa, pb) = (mesh.params[a], mesh.params[b]);
        let tag = match domain.piece_of(pa, pb) {
            Some(piece) => piece.tag.clone(),
            None if domain.on_outer_box(pa, pb) => "cut".to_string(),
            None => "end".to_string(),
        };
        mesh.boundary.push(([a, b], tag));
    }
    for group in &domain.planes {
        let normal = group
            .tags
            .iter()
            .filter_map(|t| domain.pieces.iter().find(|p| &p.tag == t))
            .find_map(|p| piece_normal(data, domain, p));
        if let Some(n) = normal {
            mesh.nominal_normals.insert(group.name.clone(), n);
        }
        for t in &group.tags {
            if let Some(n) = domain.pieces.iter().find(|p| &p.tag == t).and_then(|p| piece_normal(data, domain, p)) {
                mesh.nominal_normals.insert(t.clone(), n);
            }
        }
    }
    Ok((mesh, BuildReport { path_mismatch, failed_edges }))
}

fn mesh_area_ok(v: &[[f64; 3]], t: [usize; 3], diam: f64) -> bool {
    let [a, b, c] = t.map(|k| v[k]);
    let area = 0.5 * norm(cross(sub(b, a), sub(c, a)));
    area > 1e-20 * diam * diam
}

/// Best-fit plane `(unit normal, offset)` through the points.
pub fn fit_plane(points: &[[f64; 3]]) -> Option<([f64; 3], f64)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k] / n;
        }
    }
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(sub(*p, mean));
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let v = eig.eigenvectors.column(k);
    let normal = [v[0], v[1], v[2]];
    Some((normal, dot(normal, mean)))
}

/// Angle between two planes with the given normals, in `[0, pi/2]`.
pub fn plane_angle(n1: [f64; 3], n2: [f64; 3]) -> f64 {
    let c = (dot(n1, n2) / (norm(n1) * norm(n2))).abs().min(1.0);
    let s = norm(cross(n1, n2)) / (norm(n1) * norm(n2));
    s.atan2(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneDeviation {
    pub name: String,
    pub vertex_count: usize,
    pub fitted_normal: [f64; 3],
    pub nominal_normal: Option<[f64; 3]>,
    /// Largest distance from the best-fit plane.
    pub max_fit_deviation: f64,
    /// Largest distance from the plane with the nominal normal through the centroid.
    pub max_nominal_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneAlignmentReport {
    pub diameter: f64,
    pub tol: f64,
    /// One entry per plane group, then one per boundary tag.
    pub groups: Vec<PlaneDeviation>,
    pub tags: Vec<PlaneDeviation>,
}

impl PlaneAlignmentReport {
    pub fn worst(&self) -> f64 {
        self.groups.iter().map(|g| g.max_fit_deviation.max(g.max_nominal_deviation)).fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.worst() < self.tol
    }

    pub fn group(&self, name: &str) -> Option<&PlaneDeviation> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn tag(&self, name: &str) -> Option<&PlaneDeviation> {
        self.tags.iter().find(|g| g.name == name)
    }
}

fn deviation(mesh: &SurfaceMesh, name: &str, tags: &[String]) -> Option<PlaneDeviation> {
    let idx = mesh.tagged_vertices(tags);
    let pts: Vec<[f64; 3]> = idx.iter().map(|&k| mesh.vertices[k]).collect();
    let (normal, offset) = fit_plane(&pts)?;
    let max_fit = pts.iter().map(|p| (dot(normal, *p) - offset).abs()).fold(0.0, f64::max);
    let nominal = mesh.nominal_normals.get(name).copied();
    let max_nominal = match nominal {
        Some(n) => {
            let mean = pts.iter().map(|p| dot(n, *p)).sum::<f64>() / pts.len() as f64;
            pts.iter().map(|p| (dot(n, *p) - mean).abs()).fold(0.0, f64::max)
        }
        None => f64::NAN,
    };
    Some(PlaneDeviation {
        name: name.into(),
        vertex_count: pts.len(),
        fitted_normal: normal,
        nominal_normal: nominal,
        max_fit_deviation: max_fit,
        max_nominal_deviation: max_nominal,
    })
}

/// Distances of tagged boundary vertices from their best-fit and nominal planes.
pub fn verify_plane_alignment(mesh: &SurfaceMesh, tol: f64) -> PlaneAlignmentReport {
    let groups = mesh.planes.iter().filter_map(|g| deviation(mesh, &g.name, &g.tags)).collect();
    let tags = mesh
        .planes
        .iter()
        .flat_map(|g| g.tags.iter())
        .filter_map(|t| deviation(mesh, t, std::slice::from_ref(t)))
        .collect();
    PlaneAlignmentReport { diameter: mesh.diameter(), tol, groups, tags }
}

/// Rigid motion `p -> m p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isometry {
    pub m: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl Isometry {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity(), t: Vector3::zeros() }
    }

    /// Reflection in the plane `n . p = d`.
    pub fn reflection(n: [f64; 3], d: f64) -> Self {
        let n = Vector3::from(n).normalize();
        Self { m: Matrix3::identity() - 2.0 * n * n.transpose(), t: 2.0 * d * n }
    }

    /// Rotation by `angle` about the vertical axis through the origin.
    pub fn vertical_rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { m: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0), t: Vector3::zeros() }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.m * Vector3::from(p) + self.t;
        [v[0], v[1], v[2]]
    }

    /// `self . other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        Self { m: self.m * other.m, t: self.m * other.t + self.t }
    }

    pub fn is_proper(&self) -> bool {
        self.m.determinant() > 0.0
    }

    fn close_to(&self, other: &Self, tol: f64) -> bool {
        (self.m - other.m).abs().max() < 1e-9 && (self.t - other.t).norm() < tol
    }
}

/// Reflections in named plane groups of the mesh, and a cap on the number of
/// copies (the group is infinite when the planes are parallel).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    pub reflections: Vec<String>,
    pub max_copies: usize,
}

impl SymmetryGroup {
    pub fn identity() -> Self {
        Self { reflections: Vec::new(), max_copies: 1 }
    }

    /// The piece and its mirror image in one plane.
    pub fn wedge(plane: &str) -> Self {
        Self { reflections: vec![plane.into()], max_copies: 2 }
    }

    /// Group generated by reflections in the given planes. For two vertical
    /// planes at angle `pi / n` this is the dihedral group of order `2n`.
    pub fn generated(planes: &[&str], max_copies: usize) -> Self {
        Self { reflections: planes.iter().map(|p| p.to_string()).collect(), max_copies }
    }
}

/// Union of the images of `mesh` under the group, welded within `1e-6`
/// times the mesh diameter.
pub fn extend_by_symmetry(mesh: &SurfaceMesh, group: &SymmetryGroup) -> Result<SurfaceMesh, BuildError> {
    let diam = mesh.diameter();
    let tol = 1e-6 * diam;
    let mut gens = Vec::new();
    for name in &group.reflections {
        let plane = mesh.planes.iter().find(|g| &g.name == name).ok_or_else(|| BuildError::UnknownPlane(name.clone()))?;
        let idx = mesh.tagged_vertices(&plane.tags);
        let pts: Vec<[f64; 3]> = idx.iter().map(|&k| mesh.vertices[k]).collect();
        let (n, d) = fit_plane(&pts).ok_or_else(|| BuildError::UnderdeterminedPlane(name.clone()))?;
        let max_gap = pts.iter().map(|p| 2.0 * (dot(n, *p) - d).abs()).fold(0.0, f64::max);
        if max_gap > tol {
            return Err(BuildError::PeriodClosure { plane: name.clone(), max_gap, tol });
        }
        gens.push(Isometry::reflection(n, d));
    }
    let mut elements = vec![Isometry::identity()];
    let mut frontier = 0;
    while frontier < elements.len() && elements.len() < group.max_copies {
        let h = elements[frontier];
        frontier += 1;
        for g in &gens {
            let cand = h.compose(g);
            if elements.len() < group.max_copies && !elements.iter().any(|e| e.close_to(&cand, tol)) {
                elements.push(cand);
            }
        }
    }
    let mut out = SurfaceMesh {
        vertices: Vec::new(),
        params: Vec::new(),
        gauss: Vec::new(),
        triangles: Vec::new(),
        boundary: Vec::new(),
        planes: if elements.len() == 1 { mesh.planes.clone() } else { Vec::new() },
        nominal_normals: if elements.len() == 1 { mesh.nominal_normals.clone() } else { HashMap::new() },
        copies: elements.len() * mesh.copies,
    };
    let mut tags: HashMap<(usize, usize), String> = HashMap::new();
    let cell = tol.max(f64::MIN_POSITIVE);
    let mut hash: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let key = |p: [f64; 3]| p.map(|x| (x / cell).floor() as i64);
    for e in &elements {
        let mut map = Vec::with_capacity(mesh.vertices.len());
        for (k, v) in mesh.vertices.iter().enumerate() {
            let p = e.apply(*v);
            let kk = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = hash.get(&[kk[0] + dx, kk[1] + dy, kk[2] + dz]) {
                            if let Some(&w) = list.iter().find(|&&w| norm(sub(out.vertices[w], p)) <= tol) {
                                found = Some(w);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let idx = found.unwrap_or_else(|| {
                let w = out.vertices.len();
                out.vertices.push(p);
                out.params.push(mesh.params[k]);
                let n = e.m * Vector3::from(normal_from_gauss(mesh.gauss[k]));
                out.gauss.push(gauss_from_normal([n[0], n[1], n[2]]));
                hash.entry(kk).or_default().push(w);
                w
            });
            map.push(idx);
        }
        for t in &mesh.triangles {
            let t = t.map(|k| map[k]);
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            out.triangles.push(if e.is_proper() { t } else { [t[0], t[2], t[1]] });
        }
        for ([a, b], tag) in &mesh.boundary {
            let (a, b) = (map[*a], map[*b]);
            tags.insert((a.min(b), a.max(b)), tag.clone());
        }
    }
    let mut counts: Vec<((usize, usize), usize)> = out.edge_counts().into_iter().collect();
    counts.sort_unstable();
    for ((a, b), n) in counts {
        if n == 1 {
            out.boundary.push(([a, b], tags.get(&(a, b)).cloned().unwrap_or_else(|| "end".into())));
        }
    }
    Ok(out)
}

/// Inverse stereographic projection of a unit normal.
pub fn gauss_from_normal(n: [f64; 3]) -> Complex64 {
    let d = 1.0 - n[2];
    if d.abs() < 1e-300 {
        return cx(f64::INFINITY, f64::INFINITY);
    }
    cx(n[0] / d, n[1] / d)
}

/// Deterministic low-discrepancy point in `[0, 1)^2`.
fn halton(k: usize) -> (f64, f64) {
    let radical = |mut n: usize, base: usize| {
        let mut f = 1.0;
        let mut r = 0.0;
        while n > 0 {
            f /= base as f64;
            r += f * (n % base) as f64;
            n /= base;
        }
        r
    };
    (radical(k + 1, 2), radical(k + 1, 3))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalityReport {
    pub interior_samples: usize,
    /// `max |E - G| / E`.
    pub max_metric_ratio: f64,
    /// `max |F| / E`.
    pub max_shear: f64,
    pub boundary_samples: usize,
    /// Largest angle between the transverse tangent at the boundary and the
    /// normal of the boundary plane.
    pub max_boundary_angle: f64,
    /// Largest value of `|w1^2 + w2^2 + w3^2| / (|w1|^2 + |w2|^2 + |w3|^2)`.
    pub max_null_residual: f64,
}

impl ConformalityReport {
    pub fn passes(&self) -> bool {
        self.max_metric_ratio < 1e-4 && self.max_shear < 1e-4 && self.max_boundary_angle < 1e-3
    }
}

/// Finite-difference first fundamental form at interior samples and the
/// angle between the surface and its boundary planes at boundary samples.
pub fn verify_conformality_and_orthogonality(
    data: &WeierstrassData,
    domain: &FundamentalDomain,
    samples: usize,
) -> Result<ConformalityReport, BuildError> {
    let cfg = QuadratureConfig::with_tol(1e-13);
    let (x0, x1) = domain.x_range;
    let (y0, y1) = domain.y_range;
    let special: Vec<Complex64> =
        domain.punctures.iter().copied().chain(domain.vertices.iter().map(|v| v.0)).collect();
    let clearance = |z: Complex64| special.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min);
    let span = (x1 - x0).min(y1 - y0);
    let interior: Vec<Complex64> = (0..samples * 4)
        .map(|k| {
            let (u, v) = halton(k);
            cx(x0 + (0.05 + 0.9 * u) * (x1 - x0), y0 + (0.05 + 0.9 * v) * (y1 - y0))
        })
        .filter(|z| clearance(*z) > 0.05 * span)
        .take(samples)
        .collect();
    let disp = |a: Complex64, b: Complex64| edge_displacement(data, a, b, [0.0; 3], [0.0; 3], &cfg);
    let interior_results: Vec<Result<(f64, f64, f64), BuildError>> = interior
        .par_iter()
        .map(|&z| {
            let h = 1e-4 * span.min(clearance(z));
            let fx = disp(z - h, z + h)?.map(|v| v / (2.0 * h));
            let fy = disp(z - cx(0.0, h), z + cx(0.0, h))?.map(|v| v / (2.0 * h));
            let (e, f, g) = (dot(fx, fx), dot(fx, fy), dot(fy, fy));
            let w = omega_from_values(data.values(z)?);
            let s = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
            let m = w[0].norm_sqr() + w[1].norm_sqr() + w[2].norm_sqr();
            Ok(((e - g).abs() / e, f.abs() / e, s.norm() / m))
        })
        .collect();
    let mut report = ConformalityReport {
        interior_samples: 0,
        max_metric_ratio: 0.0,
        max_shear: 0.0,
        boundary_samples: 0,
        max_boundary_angle: 0.0,
        max_null_residual: 0.0,
    };
    for r in interior_results {
        let (ratio, shear, null) = r?;
        report.interior_samples += 1;
        report.max_metric_ratio = report.max_metric_ratio.max(ratio);
        report.max_shear = report.max_shear.max(shear);
        report.max_null_residual = report.max_null_residual.max(null);
    }
    // boundary: one-sided step into the domain, compared with the plane normal
    let per_piece = (samples / domain.pieces.len().max(1)).max(2);
    let mut bpts = Vec::new();
    for piece in &domain.pieces {
        let len = (piece.end - piece.start).norm();
        let dir = (piece.end - piece.start) / len;
        // inward normal: the domain lies to the left of pieces on the bottom
        // and right edges, which run counter-clockwise
        let inward = towards_interior(domain, piece.start + dir * (0.5 * len), dir);
        let normal = piece_normal(data, domain, piece);
        for k in 0..per_piece {
            let (u, _) = halton(k + 7);
            let z = piece.start + dir * (len * (0.05 + 0.9 * u));
            if clearance(z) > 0.02 * span {
                bpts.push((z, inward, normal));
            }
        }
    }
    let angles: Vec<Result<Option<f64>, BuildError>> = bpts
        .par_iter()
        .map(|&(z, inward, normal)| {
            let Some(n) = normal else { return Ok(None) };
            let h = 1e-7 * span.min(clearance(z));
            let t = disp(z, z + inward * h)?;
            let c = (dot(t, n) / norm(t)).abs().min(1.0);
            Ok(Some(c.acos()))
        })
        .collect();
    for a in angles {
        if let Some(a) = a? {
            report.boundary_samples += 1;
            report.max_boundary_angle = report.max_boundary_angle.max(a);
        }
    }
    Ok(report)
}

fn towards_interior(domain: &FundamentalDomain, mid: Complex64, dir: Complex64) -> Complex64 {
    let left = dir * cx(0.0, 1.0);
    let (x0, x1) = domain.x_range;
    let (y0, y1) = domain.y_range;
    let probe = mid + left * 1e-6 * (x1 - x0);
    if probe.re >= x0 && probe.re <= x1 && probe.im >= y0 && probe.im <= y1 {
        left
    } else {
        -left
    }
}

/// Spread of the height of tagged boundary vertices: zero when they lie in a
/// horizontal plane, i.e. are fixed by the reflection in it.
pub fn horizontal_spread(mesh: &SurfaceMesh, tags: &[String]) -> f64 {
    let z: Vec<f64> = mesh.tagged_vertices(tags).iter().map(|&k| mesh.vertices[k][2]).collect();
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if z.is_empty() { 0.0 } else { hi - lo }
}

/// Height spread of the image of the imaginary axis (grid nodes with `Re z = 0`).
pub fn imaginary_axis_spread(mesh: &SurfaceMesh) -> f64 {
    let z: Vec<f64> = mesh
        .params
        .iter()
        .zip(&mesh.vertices)
        .filter(|(p, _)| p.re == 0.0 && p.im > 0.0)
        .map(|(_, v)| v[2])
        .collect();
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if z.is_empty() { 0.0 } else { hi - lo }
}

/// Largest distance of the image of the imaginary axis from its best-fit line.
pub fn imaginary_axis_straightness(mesh: &SurfaceMesh) -> f64 {
    let pts: Vec<Vector3<f64>> = mesh
        .params
        .iter()
        .zip(&mesh.vertices)
        .filter(|(p, _)| p.re == 0.0 && p.im > 0.0)
        .map(|(_, v)| Vector3::from(*v))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        cov += (p - mean) * (p - mean).transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("3 eigenvalues");
    let dir = eig.eigenvectors.column(k).into_owned();
    pts.iter().map(|p| ((p - mean) - dir * dir.dot(&(p - mean))).norm()).fold(0.0, f64::max)
}

/// `f(z)` by integrating along the straight segment from `base`.
pub fn evaluate_map(data: &WeierstrassData, base: Complex64, z: Complex64) -> Result<[f64; 3], BuildError> {
    edge_displacement(data, base, z, [0.0; 3], [0.0; 3], &QuadratureConfig::with_tol(1e-13))
}

/// Real Moebius map `(p z + q) / (r z + s)` sending three real points to three real points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl Moebius {
    pub fn through(from: [f64; 3], to: [f64; 3]) -> Self {
        // rows (z, 1, -w z, -w) . (p, q, r, s) = 0; the kernel by cofactors
        let rows: Vec<[f64; 4]> = (0..3).map(|k| [from[k], 1.0, -to[k] * from[k], -to[k]]).collect();
        let minor = |skip: usize| {
            let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
            let m = |i: usize, j: usize| rows[i][cols[j]];
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        };
        let v = [minor(0), -minor(1), minor(2), -minor(3)];
        let det = v[0] * v[3] - v[1] * v[2];
        let sign = if det < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / det.abs().sqrt();
        Self { p: v[0] * scale, q: v[1] * scale, r: v[2] * scale, s: v[3] * scale }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (z * self.p + self.q) / (z * self.r + self.s)
    }

    /// Positive determinant: maps the upper half-plane to itself.
    pub fn preserves_upper_half_plane(&self) -> bool {
        self.p * self.s - self.q * self.r > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusReport {
    pub scale: f64,
    /// Largest `|f(M z) - T f(z)|` over the samples for the best rigid `T`.
    pub fit_residual: f64,
    /// `|T^order p - p|` for the first sample.
    pub orbit_residual: f64,
    pub rotation_angle: f64,
    pub axis: [f64; 3],
}

/// Fits the rigid motion realizing `M` on the surface and checks its order.
pub fn moebius_symmetry(
    data: &WeierstrassData,
    domain: &FundamentalDomain,
    m: &Moebius,
    order: usize,
    samples: usize,
) -> Result<MoebiusReport, BuildError> {
    let special: Vec<Complex64> =
        domain.punctures.iter().copied().chain(domain.vertices.iter().map(|v| v.0)).collect();
    let clear = |z: Complex64| special.iter().all(|p| (z - p).norm() > 0.3);
    let (x0, x1) = domain.x_range;
    let pts: Vec<Complex64> = (0..samples * 20)
        .map(|k| {
            let (u, v) = halton(k);
            cx(x0 + u * (x1 - x0), 0.1 + 3.0 * v)
        })
        .filter(|z| clear(*z) && clear(m.apply(*z)) && m.apply(*z).norm() < x1)
        .take(samples)
        .collect();
    let pairs: Vec<Result<([f64; 3], [f64; 3]), BuildError>> = pts
        .par_iter()
        .map(|&z| Ok((evaluate_map(data, domain.base, z)?, evaluate_map(data, domain.base, m.apply(z))?)))
        .collect();
    let pairs: Vec<([f64; 3], [f64; 3])> = pairs.into_iter().collect::<Result<_, _>>()?;
    let n = pairs.len() as f64;
    let ca = pairs.iter().fold(Vector3::zeros(), |s, p| s + Vector3::from(p.0)) / n;
    let cb = pairs.iter().fold(Vector3::zeros(), |s, p| s + Vector3::from(p.1)) / n;
    let mut h = Matrix3::zeros();
    for (a, b) in &pairs {
        h += (Vector3::from(*a) - ca) * (Vector3::from(*b) - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rot = vt.transpose() * d * u.transpose();
    let iso = Isometry { m: rot, t: cb - rot * ca };
    let scale = pairs.iter().map(|p| (Vector3::from(p.0) - ca).norm()).fold(0.0, f64::max);
    let fit_residual = pairs.iter().map(|(a, b)| norm(sub(iso.apply(*a), *b))).fold(0.0, f64::max);
    let start = pairs[0].0;
    let mut p = start;
    for _ in 0..order {
        p = iso.apply(p);
    }
    let angle = ((rot.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let axis = [rot[(2, 1)] - rot[(1, 2)], rot[(0, 2)] - rot[(2, 0)], rot[(1, 0)] - rot[(0, 1)]];
    let an = norm(axis).max(f64::MIN_POSITIVE);
    Ok(MoebiusReport {
        scale,
        fit_residual,
        orbit_residual: norm(sub(p, start)),
        rotation_angle: angle,
        axis: axis.map(|x| x / an),
    })
}

/// Wedge angle `pi * alpha` as the angle between the fitted planes of two groups.
pub fn wedge_angle(report: &PlaneAlignmentReport, first: &str, second: &str) -> Option<f64> {
    Some(plane_angle(report.group(first)?.fitted_normal, report.group(second)?.fitted_normal))
}

/// Number of copies in the full `n`-fold extension, `2n` (the dihedral group of order `2n`).
pub fn dihedral_copies(alpha: f64) -> Option<usize> {
    if alpha <= 0.0 {
        return None;
    }
    let n = (1.0 / alpha).round();
    ((1.0 / alpha - n).abs() < 1e-9).then_some(2 * n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_grid_counts() {
        let d = FundamentalDomain::rectangle((0.0, 1.0), (0.0, 1.0));
        let g = sample_domain(&d, 8, DEFAULT_PUNCTURE_RADIUS).unwrap();
        assert_eq!(g.points.len(), 81);
        assert_eq!(g.tree.len(), 80);
    }

    #[test]
    fn rejects_low_resolution_and_overlap() {
        let d = FundamentalDomain::rectangle((0.0, 1.0), (0.0, 1.0));
        assert_eq!(sample_domain(&d, 4, 0.01), Err(BuildError::Resolution(4)));
        let mut d = d;
        d.punctures = vec![cx(0.2, 0.0), cx(0.21, 0.0)];
        assert!(matches!(sample_domain(&d, 8, 0.01), Err(BuildError::OverlappingPunctures(..))));
    }

    #[test]
    fn reflection_is_involution() {
        let r = Isometry::reflection([1.0, 2.0, 0.5], 0.7);
        let p = [0.3, -1.2, 4.0];
        let q = r.apply(r.apply(p));
        assert!(norm(sub(p, q)) < 1e-14);
        assert!(!r.is_proper());
    }

    #[test]
    fn moebius_through_three_points() {
        let m = Moebius::through([1.0, 2.0, 5.0], [-1.0, 0.0, 3.0]);
        for (z, w) in [(1.0, -1.0), (2.0, 0.0), (5.0, 3.0)] {
            assert!((m.apply(cx(z, 0.0)) - cx(w, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_fit_recovers_plane() {
        let pts: Vec<[f64; 3]> =
            (0..10).map(|k| [k as f64, (k * k) as f64 * 0.1, 2.0]).collect();
        let (n, d) = fit_plane(&pts).unwrap();
        assert!((n[2].abs() - 1.0).abs() < 1e-12 && (d.abs() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_normal_round_trip() {
        let g = cx(0.3, -1.7);
        let back = gauss_from_normal(normal_from_gauss(g));
        assert!((back - g).norm() < 1e-13);
    }

    #[test]
    fn dihedral_copy_count() {
        assert_eq!(dihedral_copies(0.2), Some(10));
        assert_eq!(dihedral_copies(0.0), None);
        assert_eq!(dihedral_copies(0.3), None);
    }
}
