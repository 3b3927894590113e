use std::f64::consts::PI;

use dihedral_core::builder::*;
use dihedral_core::periods::{
    continuation, dccw_limit_root, de_limit_root, solve_family, DeParams, DksParams, Family, FamilyParams, SolveOptions,
};
use dihedral_core::{Complex64, TorusModulus, WeierstrassData};
use proptest::prelude::*;

const RES: usize = 24;

fn de_at(alpha: f64) -> FamilyParams {
    let init = FamilyParams::De(DeParams { a: 2.3, b: 3.1, alpha: 0.0, rho: 1.0 });
    if alpha == 0.0 {
        return solve_family(Family::De, 0.0, None, &init, &SolveOptions::default()).unwrap().params;
    }
    let schedule: Vec<f64> = (0..=10).map(|k| alpha * k as f64 / 10.0).collect();
    continuation(Family::De, &schedule, None, &init, &SolveOptions::default()).unwrap().records.last().unwrap().params
}

fn dks_at_i() -> FamilyParams {
    let init = FamilyParams::Dks(DksParams { a: 0.2, c: 0.2, tau: TorusModulus::imaginary(1.0).unwrap(), alpha: 0.0 });
    solve_family(Family::Dks, 0.0, None, &init, &SolveOptions::default()).unwrap().params
}

fn mesh_of(data: &WeierstrassData, res: usize) -> SurfaceMesh {
    let domain = FundamentalDomain::for_data(data);
    let grid = sample_domain(&domain, res, DEFAULT_PUNCTURE_RADIUS).unwrap();
    build_fundamental_piece(data, &domain, &grid).unwrap().0
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let t = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

#[test]
fn rectangle_grid_is_spanned_by_its_tree() {
    let domain = FundamentalDomain::rectangle((0.0, 1.0), (0.0, 1.0));
    let grid = sample_domain(&domain, 8, DEFAULT_PUNCTURE_RADIUS).unwrap();
    let valid = grid.valid.iter().filter(|v| **v).count();
    assert_eq!(grid.tree.len(), valid - 1);
    assert!(matches!(sample_domain(&domain, 4, DEFAULT_PUNCTURE_RADIUS), Err(BuildError::Resolution(4))));
}

#[test]
fn tree_edges_stay_outside_puncture_disks() {
    let data = de_at(0.0).weierstrass_data().unwrap();
    let domain = FundamentalDomain::for_data(&data);
    let grid = sample_domain(&domain, RES, DEFAULT_PUNCTURE_RADIUS).unwrap();
    assert!(!domain.punctures.is_empty());
    for &(a, b) in grid.tree.iter().chain(&grid.extra_edges) {
        for &p in &domain.punctures {
            let d = segment_distance(p, grid.points[a], grid.points[b]);
            assert!(d >= grid.puncture_radius * (1.0 - 1e-12), "edge {a}-{b} passes {d} from {p}");
        }
    }
}

#[test]
fn quarter_torus_has_six_pieces() {
    let data = dks_at_i().weierstrass_data().unwrap();
    let domain = FundamentalDomain::for_data(&data);
    assert!(matches!(domain.kind, DomainKind::QuarterTorus(_)));
    let mut tags: Vec<&str> = domain.pieces.iter().map(|p| p.tag.as_str()).collect();
    tags.sort_unstable();
    assert_eq!(tags, ["dl", "dr", "ld", "lu", "r", "u"]);
    let names: Vec<&str> = domain.planes.iter().map(|g| g.name.as_str()).collect();
    for n in ["V0", "V1", "H0", "H1"] {
        assert!(names.contains(&n), "{names:?}");
    }
}

#[test]
fn fundamental_piece_is_a_disk() {
    let mesh = mesh_of(&de_at(0.0).weierstrass_data().unwrap(), RES);
    assert_eq!(mesh.euler_characteristic(), 1);
    assert_eq!(mesh.boundary_loops(), 1);
    assert!(!mesh.has_degenerate_triangles());
    assert_eq!(mesh.copies, 1);
}

#[test]
fn identity_group_leaves_mesh_unchanged() {
    let mesh = mesh_of(&de_at(0.0).weierstrass_data().unwrap(), RES);
    let same = extend_by_symmetry(&mesh, &SymmetryGroup::identity()).unwrap();
    assert_eq!(same.vertices, mesh.vertices);
    assert_eq!(same.triangles, mesh.triangles);
}

#[test]
fn unknown_plane_is_an_error() {
    let mesh = mesh_of(&de_at(0.0).weierstrass_data().unwrap(), RES);
    assert!(matches!(extend_by_symmetry(&mesh, &SymmetryGroup::wedge("Q")), Err(BuildError::UnknownPlane(_))));
}

#[test]
fn fifth_dihedral_surface_closes_up() {
    let p = de_at(0.2);
    let mesh = mesh_of(&p.weierstrass_data().unwrap(), RES);
    let report = verify_plane_alignment(&mesh, 1e-6 * mesh.diameter());
    assert!(report.passes(), "{:?}", report.worst());
    let angle = wedge_angle(&report, "A", "B").unwrap();
    assert!((angle - PI / 5.0).abs() < 1e-6, "{angle}");
    let copies = dihedral_copies(0.2).unwrap();
    assert_eq!(copies, 10);
    let full = extend_by_symmetry(&mesh, &SymmetryGroup::generated(&["A", "B"], copies)).unwrap();
    assert_eq!(full.copies, 10);
    // one end: genus 3(n - 1) = 12 with a single boundary collar
    assert_eq!(full.boundary_loops(), 1);
    assert_eq!(full.euler_characteristic(), 2 - 2 * 12 - 1);
}

#[test]
fn wrong_parameters_break_the_planes() {
    let FamilyParams::De(mut p) = de_at(0.0) else { unreachable!() };
    let good = mesh_of(&FamilyParams::De(p).weierstrass_data().unwrap(), RES);
    let tol = 1e-6 * good.diameter();
    assert!(verify_plane_alignment(&good, tol).passes());
    p.a += 0.1;
    let bad = mesh_of(&FamilyParams::De(p).weierstrass_data().unwrap(), RES);
    let report = verify_plane_alignment(&bad, 1e-6 * bad.diameter());
    assert!(report.worst() > 1e3 * 1e-6 * bad.diameter(), "{}", report.worst());
}

#[test]
fn dccw_axis_curve_is_horizontal() {
    let init = FamilyParams::Dccw(dccw_limit_root());
    let p = solve_family(Family::Dccw, 0.0, None, &init, &SolveOptions::default()).unwrap().params;
    let mesh = mesh_of(&p.weierstrass_data().unwrap(), RES);
    assert!(imaginary_axis_spread(&mesh) < 1e-7 * mesh.diameter().max(1.0));
}

#[test]
fn slab_piece_has_parallel_walls() {
    let data = dks_at_i().weierstrass_data().unwrap();
    let mesh = mesh_of(&data, RES);
    let report = verify_plane_alignment(&mesh, 1e-6 * mesh.diameter());
    assert!(report.passes());
    let (dr, u) = (report.tag("dr").unwrap(), report.tag("u").unwrap());
    assert!(plane_angle(dr.fitted_normal, u.fitted_normal) < 1e-6);
    assert!(wedge_angle(&report, "V0", "V1").unwrap() < 1e-6);
}

#[test]
fn conformal_and_orthogonal_to_the_planes() {
    let p = de_at(0.0);
    let data = p.weierstrass_data().unwrap();
    let domain = FundamentalDomain::for_data(&data);
    let r = verify_conformality_and_orthogonality(&data, &domain, 16).unwrap();
    assert!(r.passes(), "{r:?}");
    assert!(r.max_null_residual < 1e-10);
}

#[test]
fn dh_scale_scales_the_surface() {
    let data = de_at(0.0).weierstrass_data().unwrap();
    let base = mesh_of(&data, 12);
    let scaled = mesh_of(&data.clone().with_dh_scale(2.5), 12);
    for (v, w) in base.vertices.iter().zip(&scaled.vertices) {
        for k in 0..3 {
            assert!((2.5 * v[k] - w[k]).abs() < 1e-9 * (1.0 + v[k].abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gauss_rotation_rotates_about_the_axis(t in -PI..PI) {
        let (a, b) = de_limit_root();
        let data = FamilyParams::De(DeParams { a, b, alpha: 0.0, rho: 1.0 }).weierstrass_data().unwrap();
        let base = mesh_of(&data, 12);
        let turned = mesh_of(&data.with_gauss_rotation(t), 12);
        let (s, c) = t.sin_cos();
        let err = base.vertices.iter().zip(&turned.vertices).map(|(v, w)| {
            let x = c * v[0] - s * v[1];
            let y = s * v[0] + c * v[1];
            (x - w[0]).abs().max((y - w[1]).abs()).max((v[2] - w[2]).abs())
        }).fold(0.0, f64::max);
        let diam = base.diameter();
        prop_assert!(err < 1e-9 * diam, "err {err}");
    }

    #[test]
    fn isometries_compose(nx in -1.0f64..1.0, ny in -1.0f64..1.0, d in -2.0f64..2.0, x in -3.0f64..3.0) {
        prop_assume!(nx.hypot(ny) > 0.1);
        let r = Isometry::reflection([nx, ny, 0.0], d);
        prop_assert!(!r.is_proper());
        let twice = r.compose(&r);
        prop_assert!(twice.is_proper());
        let p = [x, 0.5 * x, 1.0];
        let q = twice.apply(p);
        prop_assert!((0..3).all(|k| (p[k] - q[k]).abs() < 1e-12));
    }
}
