//! Analytic scene geometry: exact/bounded SDF shapes, pinhole cameras,
//! turntable pose synthesis, ray generation and sphere tracing, plus the
//! projected-azimuth map that defines ground-truth AoLP.

mod camera;
mod ray;
mod shape;
mod trace;

pub use camera::{projected_azimuth, turntable_poses, CameraView};
pub use ray::Ray;
pub use shape::AnalyticShape;
pub use trace::{intersect, SurfaceHit};

use nalgebra::Vector3;

/// Axis-aligned bounding box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    /// Cube `[-h, h]^3`.
    pub fn centered_cube(h: f64) -> Self {
        Self::new(Vector3::repeat(-h), Vector3::repeat(h))
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn diagonal(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.min + self.max)
    }

    /// Map a point in `[0,1]^3` into the box.
    pub fn lerp(&self, u: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.min.x + u.x * (self.max.x - self.min.x),
            self.min.y + u.y * (self.max.y - self.min.y),
            self.min.z + u.z * (self.max.z - self.min.z),
        )
    }

    /// Parameter interval where the ray overlaps the box, if any.
    pub fn clip_ray(&self, origin: &Vector3<f64>, direction: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if direction[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / direction[i];
            let (mut a, mut b) = ((self.min[i] - origin[i]) * inv, (self.max[i] - origin[i]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}
