use dihedral_core::builder::SurfaceMesh;
use dihedral_core::periods::{de_limit_root, DeParams, FamilyParams};
use dihedral_forge::commands::{build_mesh, Symmetry};
use dihedral_forge::export::{write_mesh, write_obj, write_ply, MeshFormat};

fn mesh() -> SurfaceMesh {
    let (a, b) = de_limit_root();
    let p = FamilyParams::De(DeParams { a, b, alpha: 0.0, rho: 1.0 });
    build_mesh(&p, 12, dihedral_core::builder::DEFAULT_PUNCTURE_RADIUS, Symmetry::Fundamental).unwrap()
}

#[test]
fn obj_lists_vertices_faces_and_boundary_groups() {
    let m = mesh();
    let mut buf = Vec::new();
    write_obj(&m, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let count = |p: &str| text.lines().filter(|l| l.starts_with(p)).count();
    assert_eq!(count("v "), m.vertices.len());
    assert_eq!(count("f "), m.triangles.len());
    assert_eq!(count("l "), m.boundary.len());
    assert!(text.lines().any(|l| l.starts_with("g plane_")));
    let n = m.vertices.len();
    for l in text.lines().filter(|l| l.starts_with("f ") || l.starts_with("l ")) {
        for idx in l.split_whitespace().skip(1) {
            let k: usize = idx.parse().unwrap();
            assert!((1..=n).contains(&k), "{l}");
        }
    }
}

#[test]
fn ply_header_matches_payload() {
    let m = mesh();
    let mut buf = Vec::new();
    write_ply(&m, &mut buf).unwrap();
    let end = b"end_header\n";
    let at = buf.windows(end.len()).position(|w| w == end).unwrap() + end.len();
    let header = std::str::from_utf8(&buf[..at]).unwrap();
    assert!(header.starts_with("ply\nformat binary_little_endian 1.0\n"));
    assert!(header.contains(&format!("element vertex {}\n", m.vertices.len())));
    assert!(header.contains(&format!("element face {}\n", m.triangles.len())));
    assert_eq!(buf.len() - at, 24 * m.vertices.len() + 13 * m.triangles.len());
    let x = f64::from_le_bytes(buf[at..at + 8].try_into().unwrap());
    assert_eq!(x, m.vertices[0][0]);
}

#[test]
fn format_follows_extension_and_writes_atomically() {
    assert_eq!(MeshFormat::from_path("a/b.OBJ".as_ref()), Some(MeshFormat::Obj));
    assert_eq!(MeshFormat::from_path("b.ply".as_ref()), Some(MeshFormat::Ply));
    assert_eq!(MeshFormat::from_path("b.stl".as_ref()), None);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.obj");
    std::fs::write(&path, "stale").unwrap();
    write_mesh(&mesh(), &path, MeshFormat::Obj).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# dihedral-forge mesh"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}
