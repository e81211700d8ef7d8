use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kdtree::KdTree;
use crate::error::{Error, Result};
use crate::sdf::TriangleMesh;

/// Point cloud with optional unit normals.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("point cloud is empty".into()));
        }
        Ok(Self {
            points,
            normals: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sample a mesh uniformly by triangle area.
    pub fn from_mesh(mesh: &TriangleMesh, samples: usize, seed: u64) -> Result<Self> {
        if mesh.faces.is_empty() || samples == 0 {
            return Err(Error::Domain("cannot sample an empty mesh".into()));
        }
        let areas: Vec<f64> = mesh.faces.iter().map(|f| mesh.face_area(f)).collect();
        let total: f64 = areas.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("mesh has zero surface area".into()));
        }
        let mut cumulative = Vec::with_capacity(areas.len());
        let mut acc = 0.0;
        for a in &areas {
            acc += a;
            cumulative.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(samples);
        for _ in 0..samples {
            let target = rng.gen::<f64>() * total;
            let fi = cumulative.partition_point(|&c| c < target).min(areas.len() - 1);
            let f = &mesh.faces[fi];
            let (a, b, c) = (mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
            // Uniform barycentric sample.
            let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            points.push(a + u * (b - a) + v * (c - a));
        }
        Self::new(points)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.rotation * n).collect()),
        }
    }
}

/// Rotation + translation with orthonormal rotation (det +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation * rotation.transpose() - Matrix3::identity())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if ortho > 1e-8 || (rotation.determinant() - 1.0).abs() > 1e-8 {
            return Err(Error::Degenerate(
                "rotation must be orthonormal with determinant +1".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, inner: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Symmetric un-squared Chamfer distance:
/// `(mean_a min_b |a-b| + mean_b min_a |a-b|) / 2`.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("chamfer needs nonempty clouds".into()));
    }
    let one_sided = |from: &PointCloud, to: &PointCloud| -> f64 {
        let tree = KdTree::build(&to.points);
        let total: f64 = from.points.iter().map(|p| tree.nearest(p).1).sum();
        total / from.len() as f64
    };
    Ok(0.5 * (one_sided(a, b) + one_sided(b, a)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn fibonacci_sphere(n: usize, radius: f64) -> Vec<Vector3<f64>> {
        let golden = PI * (3.0 - 5.0f64.sqrt());
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let t = golden * i as f64;
                Vector3::new(r * t.cos(), y, r * t.sin()) * radius
            })
            .collect()
    }

    pub(crate) fn rot_z(angle: f64) -> Matrix3<f64> {
        let (s, c) = angle.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn chamfer_identical_clouds_is_zero() {
        let c = PointCloud::new(fibonacci_sphere(500, 1.0)).unwrap();
        assert_eq!(chamfer(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_concentric_spheres() {
        let a = PointCloud::new(fibonacci_sphere(20_000, 1.0)).unwrap();
        let b = PointCloud::new(fibonacci_sphere(20_000, 1.1)).unwrap();
        let d = chamfer(&a, &b).unwrap();
        assert!((d - 0.1).abs() < 0.01, "chamfer {d}");
    }

    #[test]
    fn chamfer_is_symmetric() {
        let a = PointCloud::new(fibonacci_sphere(300, 1.0)).unwrap();
        let b = PointCloud::new(fibonacci_sphere(500, 1.3)).unwrap();
        let ab = chamfer(&a, &b).unwrap();
        let ba = chamfer(&b, &a).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn chamfer_invariant_under_common_rigid_motion() {
        let a = PointCloud::new(fibonacci_sphere(400, 1.0)).unwrap();
        let b = PointCloud::new(fibonacci_sphere(350, 1.2)).unwrap();
        let d0 = chamfer(&a, &b).unwrap();
        let t = RigidTransform::new(rot_z(0.7), Vector3::new(0.3, -0.2, 1.0)).unwrap();
        let d1 = chamfer(&a.transformed(&t), &b.transformed(&t)).unwrap();
        assert!((d0 - d1).abs() < 1e-10);
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(PointCloud::new(vec![]).is_err());
    }

    #[test]
    fn mesh_sampling_covers_the_surface() {
        use crate::scene::{Aabb, AnalyticShape};
        use crate::sdf::marching_cubes;
        let mesh = marching_cubes(
            &AnalyticShape::sphere(Vector3::zeros(), 1.0),
            32,
            &Aabb::centered_cube(1.4),
        )
        .unwrap();
        let cloud = PointCloud::from_mesh(&mesh, 5000, 1).unwrap();
        assert_eq!(cloud.len(), 5000);
        for p in &cloud.points {
            assert!((p.norm() - 1.0).abs() < 0.05);
        }
        // Both hemispheres are reached.
        let up = cloud.points.iter().filter(|p| p.z > 0.0).count();
        assert!(up > 1500 && up < 3500);
    }

    #[test]
    fn rigid_transform_validates_and_inverts() {
        assert!(RigidTransform::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
        let t = RigidTransform::new(rot_z(0.5), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let p = Vector3::new(0.3, -0.7, 0.2);
        let q = t.inverse().apply(&t.apply(&p));
        assert!((p - q).norm() < 1e-12);
        assert!((t.angle() - 0.5).abs() < 1e-12);
    }
}
