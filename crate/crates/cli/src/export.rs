//! OBJ and binary PLY writers, and atomic file replacement.

use std::io::{self, Write};
use std::path::Path;

use dihedral_core::builder::SurfaceMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

/// `v`/`f` lines (1-based), then the boundary edges as `l` elements grouped
/// by tag: `g plane_<tag>` for symmetry-plane pieces, `g cut` and `g end`
/// for the truncation.
pub fn write_obj<W: Write>(mesh: &SurfaceMesh, mut w: W) -> io::Result<()> {
    writeln!(w, "# dihedral-forge mesh, {} copies", mesh.copies)?;
    for v in &mesh.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v[0], v[1], v[2])?;
    }
    writeln!(w, "g surface")?;
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    let mut tags: Vec<&str> = mesh.boundary.iter().map(|(_, t)| t.as_str()).collect();
    tags.sort_unstable();
    tags.dedup();
    for tag in tags {
        match tag {
            "cut" | "end" => writeln!(w, "g {tag}")?,
            _ => writeln!(w, "g plane_{tag}")?,
        }
        for ([a, b], _) in mesh.boundary.iter().filter(|(_, t)| t == tag) {
            writeln!(w, "l {} {}", a + 1, b + 1)?;
        }
    }
    Ok(())
}

pub fn write_ply<W: Write>(mesh: &SurfaceMesh, mut w: W) -> io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\ncomment dihedral-forge\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\nelement face {}\n\
         property list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )?;
    for v in &mesh.vertices {
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8])?;
        for &k in t {
            let k = i32::try_from(k).map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "vertex index exceeds i32"))?;
            w.write_all(&k.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = io::BufWriter::new(tmp.as_file_mut());
        contents(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_mesh(mesh: &SurfaceMesh, path: &Path, format: MeshFormat) -> io::Result<()> {
    write_atomic(path, |w| match format {
        MeshFormat::Obj => write_obj(mesh, w),
        MeshFormat::Ply => write_ply(mesh, w),
    })
}
