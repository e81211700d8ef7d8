use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::sdf::TriangleMesh;

/// Write a mesh as OBJ or (ascii) PLY, selected by the file extension.
pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => write_obj(path, mesh),
        Some("ply") => write_ply(path, mesh),
        other => Err(Error::Config(format!(
            "mesh output must end in .obj or .ply, got {other:?}"
        ))),
    }
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(
        std::fs::File::create(path).map_err(|e| super::pfm::annotate(path, &e))?,
    );
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ply(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(
        std::fs::File::create(path).map_err(|e| super::pfm::annotate(path, &e))?,
    );
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element face {}", mesh.faces.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Read an OBJ or ascii PLY mesh.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => read_obj(path),
        Some("ply") => read_ply(path),
        other => Err(Error::Config(format!(
            "mesh input must end in .obj or .ply, got {other:?}"
        ))),
    }
}

fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let file = std::fs::File::open(path).map_err(|e| super::pfm::annotate(path, &e))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let mut parts = line.split_ascii_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coord = |_: &str| -> Result<f64> {
                    parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("{}:{}: bad vertex", path.display(), ln + 1)))
                };
                vertices.push(Vector3::new(coord("x")?, coord("y")?, coord("z")?));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or(t);
                        first.parse::<usize>().map(|i| i - 1).map_err(|_| {
                            Error::Parse(format!("{}:{}: bad face index", path.display(), ln + 1))
                        })
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Parse(format!(
                        "{}:{}: face needs 3 indices",
                        path.display(),
                        ln + 1
                    )));
                }
                // Fan-triangulate polygons.
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(Error::Parse(format!("{}: empty mesh", path.display())));
    }
    Ok(TriangleMesh { vertices, faces })
}

fn read_ply(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| super::pfm::annotate(path, &e))?;
    let mut lines = text.lines();
    let bad = |msg: &str| Error::Parse(format!("{}: {msg}", path.display()));
    if lines.next() != Some("ply") {
        return Err(bad("missing ply magic"));
    }
    let mut n_vertices = 0usize;
    let mut n_faces = 0usize;
    for line in lines.by_ref() {
        if line.starts_with("format") {
            if !line.contains("ascii") {
                return Err(bad("only ascii ply supported"));
            }
        } else if let Some(rest) = line.strip_prefix("element vertex ") {
            n_vertices = rest.trim().parse().map_err(|_| bad("bad vertex count"))?;
        } else if let Some(rest) = line.strip_prefix("element face ") {
            n_faces = rest.trim().parse().map_err(|_| bad("bad face count"))?;
        } else if line == "end_header" {
            break;
        }
    }
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let line = lines.next().ok_or_else(|| bad("truncated vertices"))?;
        let mut it = line.split_ascii_whitespace();
        let mut coord = || -> Result<f64> {
            it.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad vertex line"))
        };
        vertices.push(Vector3::new(coord()?, coord()?, coord()?));
    }
    let mut faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let line = lines.next().ok_or_else(|| bad("truncated faces"))?;
        let idx: Vec<usize> = line
            .split_ascii_whitespace()
            .skip(1)
            .map(|t| t.parse::<usize>().map_err(|_| bad("bad face line")))
            .collect::<Result<_>>()?;
        for k in 1..idx.len().saturating_sub(1) {
            faces.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(bad("empty mesh"));
    }
    Ok(TriangleMesh { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Aabb, AnalyticShape};
    use crate::sdf::marching_cubes;
    use tempfile::tempdir;

    fn sample_mesh() -> TriangleMesh {
        marching_cubes(
            &AnalyticShape::sphere(Vector3::zeros(), 1.0),
            16,
            &Aabb::centered_cube(1.4),
        )
        .unwrap()
    }

    #[test]
    fn obj_round_trip() {
        let dir = tempdir().unwrap();
        let mesh = sample_mesh();
        let path = dir.path().join("m.obj");
        write_mesh(&path, &mesh).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.faces, mesh.faces);
        for (a, b) in mesh.vertices.iter().zip(back.vertices.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn ply_round_trip() {
        let dir = tempdir().unwrap();
        let mesh = sample_mesh();
        let path = dir.path().join("m.ply");
        write_mesh(&path, &mesh).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.faces.len(), mesh.faces.len());
        assert_eq!(back.vertices.len(), mesh.vertices.len());
    }

    #[test]
    fn unknown_extension_rejected() {
        let dir = tempdir().unwrap();
        assert!(write_mesh(&dir.path().join("m.stl"), &sample_mesh()).is_err());
    }
}
