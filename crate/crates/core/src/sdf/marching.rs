use std::collections::HashMap;

use nalgebra::Vector3;
use ndarray::Array2;
use rayon::prelude::*;

use super::field::SdfField;
use super::mc_tables::{CORNER_OFFSETS, EDGE_CORNERS, TRIANGLE_TABLE};
use crate::error::{Error, Result};
use crate::scene::Aabb;

/// Indexed triangle mesh with shared (welded) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// `V - E + F` over unique undirected edges; 2 for a watertight
    /// genus-zero surface.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    pub fn face_area(&self, f: &[usize; 3]) -> f64 {
        let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        self.faces.iter().map(|f| self.face_area(f)).sum()
    }

    /// Signed volume via the divergence theorem; positive for outward-wound
    /// closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn flip_orientation(&mut self) {
        for f in &mut self.faces {
            f.swap(1, 2);
        }
    }
}

/// Extract the zero level set on a `resolution^3` grid spanning `bbox` with
/// the classic cube-table triangulation. Vertices on shared cell edges are
/// welded, giving a watertight mesh away from the box boundary.
///
/// Errors with [`Error::EmptyLevelSet`] when no cell straddles zero and with
/// a domain error for resolutions below 16.
pub fn marching_cubes(
    field: &dyn SdfField,
    resolution: usize,
    bbox: &Aabb,
) -> Result<TriangleMesh> {
    if resolution < 16 {
        return Err(Error::Domain(format!(
            "marching cubes resolution must be at least 16, got {resolution}"
        )));
    }
    let n = resolution + 1; // grid points per axis
    let d = bbox.diagonal();
    let step = Vector3::new(
        d.x / resolution as f64,
        d.y / resolution as f64,
        d.z / resolution as f64,
    );
    let grid_point = |i: usize, j: usize, k: usize| {
        Vector3::new(
            bbox.min.x + step.x * i as f64,
            bbox.min.y + step.y * j as f64,
            bbox.min.z + step.z * k as f64,
        )
    };

    // Evaluate the field on z-slabs in parallel, batched per slab.
    let values: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut pts = Array2::zeros((n * n, 3));
            for j in 0..n {
                for i in 0..n {
                    let p = grid_point(i, j, k);
                    let row = j * n + i;
                    pts[(row, 0)] = p.x;
                    pts[(row, 1)] = p.y;
                    pts[(row, 2)] = p.z;
                }
            }
            field.values(&pts).to_vec()
        })
        .collect();
    let value = |i: usize, j: usize, k: usize| values[k][j * n + i];

    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    // Canonical edge key: (grid index of the lower corner, axis).
    let mut edge_index: HashMap<(usize, usize, usize, u8), usize> = HashMap::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for k in 0..resolution {
        for j in 0..resolution {
            for i in 0..resolution {
                let corner_vals: [f64; 8] = std::array::from_fn(|c| {
                    let [dx, dy, dz] = CORNER_OFFSETS[c];
                    value(i + dx, j + dy, k + dz)
                });
                let mut case = 0usize;
                for (c, &v) in corner_vals.iter().enumerate() {
                    if v < 0.0 {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }

                let row = &TRIANGLE_TABLE[case];
                let mut tri = [0usize; 3];
                let mut filled = 0;
                for &entry in row.iter() {
                    if entry < 0 {
                        break;
                    }
                    let edge = entry as usize;
                    let [ca, cb] = EDGE_CORNERS[edge];
                    let [ax, ay, az] = CORNER_OFFSETS[ca];
                    let [bx, by, bz] = CORNER_OFFSETS[cb];
                    let ga = (i + ax, j + ay, k + az);
                    let gb = (i + bx, j + by, k + bz);
                    // Lower corner plus axis identifies the edge globally.
                    let (lo, axis) = if ga <= gb {
                        (ga, axis_of(ga, gb))
                    } else {
                        (gb, axis_of(gb, ga))
                    };
                    let key = (lo.0, lo.1, lo.2, axis);
                    let vid = *edge_index.entry(key).or_insert_with(|| {
                        let va = corner_vals[ca];
                        let vb = corner_vals[cb];
                        let t = if (vb - va).abs() < 1e-30 {
                            0.5
                        } else {
                            (-va / (vb - va)).clamp(0.0, 1.0)
                        };
                        let pa = grid_point(ga.0, ga.1, ga.2);
                        let pb = grid_point(gb.0, gb.1, gb.2);
                        vertices.push(pa + t * (pb - pa));
                        vertices.len() - 1
                    });
                    tri[filled] = vid;
                    filled += 1;
                    if filled == 3 {
                        faces.push(tri);
                        filled = 0;
                    }
                }
            }
        }
    }

    if faces.is_empty() {
        return Err(Error::EmptyLevelSet);
    }
    let mut mesh = TriangleMesh { vertices, faces };
    // Normalize winding so closed meshes enclose positive volume.
    if mesh.signed_volume() < 0.0 {
        mesh.flip_orientation();
    }
    Ok(mesh)
}

fn axis_of(lo: (usize, usize, usize), hi: (usize, usize, usize)) -> u8 {
    if hi.0 > lo.0 {
        0
    } else if hi.1 > lo.1 {
        1
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::AnalyticShape;

    fn unit_sphere() -> AnalyticShape {
        AnalyticShape::sphere(Vector3::zeros(), 1.0)
    }

    #[test]
    fn sphere_vertices_lie_on_surface() {
        let mesh = marching_cubes(&unit_sphere(), 64, &Aabb::centered_cube(1.5)).unwrap();
        assert!(!mesh.vertices.is_empty());
        for v in &mesh.vertices {
            assert!((v.norm() - 1.0).abs() < 0.01, "vertex radius {}", v.norm());
        }
        let cell_diag = (3.0f64 / 64.0) * 3.0f64.sqrt();
        for v in &mesh.vertices {
            assert!(unit_sphere().sdf(v).abs() < cell_diag);
        }
    }

    #[test]
    fn sphere_mesh_is_closed_genus_zero() {
        let mesh = marching_cubes(&unit_sphere(), 48, &Aabb::centered_cube(1.4)).unwrap();
        assert_eq!(mesh.euler_characteristic(), 2);
        // Signed volume close to 4/3 pi and positive orientation.
        let vol = mesh.signed_volume();
        assert!((vol - 4.0 / 3.0 * std::f64::consts::PI).abs() < 0.05, "vol {vol}");
    }

    #[test]
    fn torus_mesh_has_genus_one() {
        let torus = AnalyticShape::Torus {
            center: Vector3::zeros(),
            major_radius: 0.8,
            minor_radius: 0.3,
        };
        let mesh = marching_cubes(&torus, 64, &Aabb::centered_cube(1.4)).unwrap();
        assert_eq!(mesh.euler_characteristic(), 0);
    }

    #[test]
    fn empty_field_errors() {
        // A field with no zero crossing inside the box.
        let far_sphere = AnalyticShape::sphere(Vector3::new(10.0, 0.0, 0.0), 1.0);
        assert!(matches!(
            marching_cubes(&far_sphere, 32, &Aabb::centered_cube(1.0)),
            Err(Error::EmptyLevelSet)
        ));
    }

    #[test]
    fn resolution_floor_enforced() {
        assert!(matches!(
            marching_cubes(&unit_sphere(), 8, &Aabb::centered_cube(1.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn doubling_resolution_reduces_error() {
        let bbox = Aabb::centered_cube(1.5);
        let max_err = |res: usize| {
            marching_cubes(&unit_sphere(), res, &bbox)
                .unwrap()
                .vertices
                .iter()
                .map(|v| (v.norm() - 1.0).abs())
                .fold(0.0f64, f64::max)
        };
        let coarse = max_err(24);
        let fine = max_err(48);
        assert!(fine < coarse, "coarse {coarse} vs fine {fine}");
    }
}
