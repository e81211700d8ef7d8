use nalgebra::Vector3;

use super::ray::Ray;
use super::shape::AnalyticShape;
use crate::error::{Error, Result};

const MAX_STEPS: usize = 512;
const CONVERGENCE_EPS: f64 = 1e-7;
/// All test scenes fit in this sphere around the origin.
pub const SCENE_BOUND_RADIUS: f64 = 3.0;

/// Ray-surface intersection record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Vector3<f64>,
    pub distance: f64,
    /// Unit normal oriented toward the ray origin.
    pub normal: Vector3<f64>,
}

fn clip_to_sphere(ray: &Ray, center: &Vector3<f64>, radius: f64) -> Option<(f64, f64)> {
    let oc = ray.origin - center;
    let b = oc.dot(&ray.direction);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let (t0, t1) = (-b - sq, -b + sq);
    if t1 < 0.0 {
        return None;
    }
    Some((t0.max(0.0), t1))
}

/// Sphere tracing against an analytic shape.
///
/// `Ok(Some(hit))` on intersection, `Ok(None)` when the ray provably misses,
/// and `Err(NoConvergence)` when the step budget is exhausted while the ray
/// is still skimming the surface.
pub fn intersect(shape: &AnalyticShape, ray: &Ray) -> Result<Option<SurfaceHit>> {
    let (bc, br) = shape.bounding_sphere();
    let bound = (bc.norm() + br).min(SCENE_BOUND_RADIUS);
    let Some((t_enter, t_exit)) = clip_to_sphere(ray, &Vector3::zeros(), bound) else {
        return Ok(None);
    };
    let safety = if shape.is_exact() { 1.0 } else { 0.9 };
    let mut t = t_enter;
    for _ in 0..MAX_STEPS {
        let p = ray.at(t);
        let d = shape.sdf(&p);
        if d < CONVERGENCE_EPS {
            let t = refine(shape, ray, t, d);
            let point = ray.at(t);
            let mut normal = shape.gradient(&point).normalize();
            if normal.dot(&ray.direction) > 0.0 {
                normal = -normal;
            }
            return Ok(Some(SurfaceHit {
                point,
                distance: t,
                normal,
            }));
        }
        t += d * safety;
        if t > t_exit {
            return Ok(None);
        }
    }
    Err(Error::NoConvergence(format!(
        "sphere tracing exceeded {MAX_STEPS} steps"
    )))
}

/// Tighten the hit with a few secant steps so that |sdf| < CONVERGENCE_EPS.
fn refine(shape: &AnalyticShape, ray: &Ray, mut t: f64, mut d: f64) -> f64 {
    for _ in 0..8 {
        if d.abs() < CONVERGENCE_EPS * 0.5 {
            break;
        }
        t += d;
        d = shape.sdf(&ray.at(t));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere() -> AnalyticShape {
        AnalyticShape::sphere(Vector3::zeros(), 1.0)
    }

    #[test]
    fn axial_hit_on_unit_sphere() {
        let ray = Ray::new(Vector3::new(0.0, 0.0, -3.0), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let hit = intersect(&unit_sphere(), &ray).unwrap().unwrap();
        assert!((hit.point - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-6);
        assert!((hit.distance - 2.0).abs() < 1e-6);
        assert!((hit.normal - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-6);
    }

    #[test]
    fn offset_ray_misses() {
        let ray = Ray::new(Vector3::new(1.2, 0.0, -3.0), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(intersect(&unit_sphere(), &ray).unwrap().is_none());
    }

    #[test]
    fn hits_are_front_facing_and_on_surface() {
        let shape = AnalyticShape::Torus {
            center: Vector3::zeros(),
            major_radius: 0.8,
            minor_radius: 0.3,
        };
        let mut hits = 0;
        for k in 0..200 {
            let a = k as f64 / 200.0 * std::f64::consts::TAU;
            let origin = Vector3::new(2.5 * a.cos(), 2.5 * a.sin(), 1.0);
            let target = Vector3::new(0.3 * a.sin(), 0.2 * a.cos(), 0.0);
            let ray = Ray::new(origin, target - origin).unwrap();
            if let Some(hit) = intersect(&shape, &ray).unwrap() {
                hits += 1;
                assert!(shape.sdf(&hit.point).abs() < 1e-6);
                assert!(hit.normal.dot(&ray.direction) < 0.0);
            }
        }
        assert!(hits > 100, "too few hits: {hits}");
    }

    #[test]
    fn sphere_hits_lie_on_analytic_surface() {
        let shape = unit_sphere();
        for k in 0..100 {
            let a = k as f64 * 0.063;
            let origin = Vector3::new(2.0 * a.cos(), 2.0 * a.sin(), 0.7);
            let ray = Ray::new(origin, -origin).unwrap();
            let hit = intersect(&shape, &ray).unwrap().unwrap();
            assert!((hit.point.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ray_pointing_away_misses() {
        let ray = Ray::new(Vector3::new(0.0, 0.0, 4.0), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(intersect(&unit_sphere(), &ray).unwrap().is_none());
    }
}
