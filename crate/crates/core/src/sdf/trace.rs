use nalgebra::Vector3;
use ndarray::Array2;

use super::field::SdfField;
use crate::scene::{Aabb, Ray};

/// Tolerance for a surface hit on the (approximately eikonal) field.
pub const HIT_EPS: f64 = 1e-4;
const MAX_MARCH_STEPS: usize = 64;
const REFINE_STEPS: usize = 12;
/// Default sample count for the ray-minimum search.
pub const MIN_RAY_SAMPLES: usize = 128;

/// Surface hit on an implicit field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldHit {
    pub point: Vector3<f64>,
    pub distance: f64,
    /// Field value at the accepted point (|value| < [`HIT_EPS`]).
    pub value: f64,
}

fn gather(rays: &[Ray], ts: &[f64], idx: &[usize]) -> Array2<f64> {
    let mut pts = Array2::zeros((idx.len(), 3));
    for (row, &i) in idx.iter().enumerate() {
        let p = rays[i].at(ts[i]);
        pts[(row, 0)] = p.x;
        pts[(row, 1)] = p.y;
        pts[(row, 2)] = p.z;
    }
    pts
}

/// Batched sphere tracing over `rays`, restricted to the bounding box.
/// Non-convergence within the step budget reports a miss. The field is only
/// approximately 1-Lipschitz, so overshoots are recovered with a bisection
/// refinement on the bracketing interval.
pub fn sphere_trace_batch(field: &dyn SdfField, rays: &[Ray], bbox: &Aabb) -> Vec<Option<FieldHit>> {
    let n = rays.len();
    let mut result: Vec<Option<FieldHit>> = vec![None; n];
    let mut ts = vec![0.0f64; n];
    let mut t_exit = vec![0.0f64; n];
    let mut prev_t = vec![0.0f64; n];
    let mut prev_f = vec![f64::INFINITY; n];
    let mut active: Vec<usize> = Vec::with_capacity(n);
    // Bracket endpoints for rays that crossed the surface.
    let mut brackets: Vec<(usize, f64, f64)> = Vec::new();

    for (i, ray) in rays.iter().enumerate() {
        if let Some((t0, t1)) = bbox.clip_ray(&ray.origin, &ray.direction) {
            ts[i] = t0;
            t_exit[i] = t1;
            prev_t[i] = t0;
            active.push(i);
        }
    }

    for _ in 0..MAX_MARCH_STEPS {
        if active.is_empty() {
            break;
        }
        let pts = gather(rays, &ts, &active);
        let f = field.values(&pts);
        let mut next_active = Vec::with_capacity(active.len());
        for (row, &i) in active.iter().enumerate() {
            let fi = f[row];
            if fi.abs() < HIT_EPS {
                result[i] = Some(FieldHit {
                    point: rays[i].at(ts[i]),
                    distance: ts[i],
                    value: fi,
                });
                continue;
            }
            if fi < 0.0 {
                // Overshot through the surface: bracket [prev_t, t].
                brackets.push((i, prev_t[i], ts[i]));
                continue;
            }
            prev_t[i] = ts[i];
            prev_f[i] = fi;
            ts[i] += fi;
            if ts[i] > t_exit[i] {
                continue; // left the box: miss
            }
            next_active.push(i);
        }
        active = next_active;
    }

    // Bisection on the sign-change brackets, batched across rays.
    for _ in 0..REFINE_STEPS {
        if brackets.is_empty() {
            break;
        }
        let mids: Vec<f64> = brackets.iter().map(|&(_, a, b)| 0.5 * (a + b)).collect();
        let idx: Vec<usize> = brackets.iter().map(|&(i, _, _)| i).collect();
        let mut pts = Array2::zeros((brackets.len(), 3));
        for (row, (&i, &tm)) in idx.iter().zip(mids.iter()).enumerate() {
            let p = rays[i].at(tm);
            pts[(row, 0)] = p.x;
            pts[(row, 1)] = p.y;
            pts[(row, 2)] = p.z;
        }
        let f = field.values(&pts);
        for (row, bracket) in brackets.iter_mut().enumerate() {
            if f[row] > 0.0 {
                bracket.1 = mids[row];
            } else {
                bracket.2 = mids[row];
            }
        }
    }
    if !brackets.is_empty() {
        let mids: Vec<f64> = brackets.iter().map(|&(_, a, b)| 0.5 * (a + b)).collect();
        let idx: Vec<usize> = brackets.iter().map(|&(i, _, _)| i).collect();
        let mut pts = Array2::zeros((brackets.len(), 3));
        for (row, (&i, &tm)) in idx.iter().zip(mids.iter()).enumerate() {
            let p = rays[i].at(tm);
            pts[(row, 0)] = p.x;
            pts[(row, 1)] = p.y;
            pts[(row, 2)] = p.z;
        }
        let f = field.values(&pts);
        for (row, &i) in idx.iter().enumerate() {
            if f[row].abs() < HIT_EPS {
                result[i] = Some(FieldHit {
                    point: rays[i].at(mids[row]),
                    distance: mids[row],
                    value: f[row],
                });
            }
        }
    }
    result
}

/// Single-ray convenience wrapper around [`sphere_trace_batch`].
pub fn sphere_trace(field: &dyn SdfField, ray: &Ray, bbox: &Aabb) -> Option<FieldHit> {
    sphere_trace_batch(field, std::slice::from_ref(ray), bbox).remove(0)
}

/// Minimum field value along each ray (uniform samples plus a ternary-search
/// refinement) and the point attaining it. Rays that miss the bounding box
/// degenerate to the single sample at their origin.
pub fn min_sdf_on_rays(
    field: &dyn SdfField,
    rays: &[Ray],
    bbox: &Aabb,
    samples: usize,
) -> Vec<(f64, Vector3<f64>)> {
    let n = rays.len();
    let samples = samples.max(2);
    let mut ranges = vec![(0.0f64, 0.0f64); n];
    for (i, ray) in rays.iter().enumerate() {
        ranges[i] = bbox.clip_ray(&ray.origin, &ray.direction).unwrap_or((0.0, 0.0));
    }

    // Coarse scan.
    let mut best_f = vec![f64::INFINITY; n];
    let mut best_k = vec![0usize; n];
    let mut pts = Array2::zeros((n, 3));
    for k in 0..samples {
        let frac = k as f64 / (samples - 1) as f64;
        for (i, ray) in rays.iter().enumerate() {
            let (t0, t1) = ranges[i];
            let p = ray.at(t0 + frac * (t1 - t0));
            pts[(i, 0)] = p.x;
            pts[(i, 1)] = p.y;
            pts[(i, 2)] = p.z;
        }
        let f = field.values(&pts);
        for i in 0..n {
            if f[i] < best_f[i] {
                best_f[i] = f[i];
                best_k[i] = k;
            }
        }
    }

    // Ternary search inside the bracketing interval around the best sample.
    let mut lo = vec![0.0f64; n];
    let mut hi = vec![0.0f64; n];
    for i in 0..n {
        let (t0, t1) = ranges[i];
        let dt = (t1 - t0) / (samples - 1) as f64;
        let tbest = t0 + best_k[i] as f64 * dt;
        lo[i] = (tbest - dt).max(t0);
        hi[i] = (tbest + dt).min(t1);
    }
    for _ in 0..28 {
        let mut pa = Array2::zeros((n, 3));
        let mut pb = Array2::zeros((n, 3));
        let mut tas = vec![0.0f64; n];
        let mut tbs = vec![0.0f64; n];
        for (i, ray) in rays.iter().enumerate() {
            let third = (hi[i] - lo[i]) / 3.0;
            tas[i] = lo[i] + third;
            tbs[i] = hi[i] - third;
            let a = ray.at(tas[i]);
            let b = ray.at(tbs[i]);
            pa[(i, 0)] = a.x;
            pa[(i, 1)] = a.y;
            pa[(i, 2)] = a.z;
            pb[(i, 0)] = b.x;
            pb[(i, 1)] = b.y;
            pb[(i, 2)] = b.z;
        }
        let fa = field.values(&pa);
        let fb = field.values(&pb);
        for i in 0..n {
            if fa[i] < fb[i] {
                hi[i] = tbs[i];
            } else {
                lo[i] = tas[i];
            }
        }
    }

    let mut final_pts = Array2::zeros((n, 3));
    let mut t_final = vec![0.0f64; n];
    for (i, ray) in rays.iter().enumerate() {
        t_final[i] = 0.5 * (lo[i] + hi[i]);
        let p = ray.at(t_final[i]);
        final_pts[(i, 0)] = p.x;
        final_pts[(i, 1)] = p.y;
        final_pts[(i, 2)] = p.z;
    }
    let f = field.values(&final_pts);
    (0..n)
        .map(|i| {
            let refined = (f[i], rays[i].at(t_final[i]));
            // Keep the coarse minimum if refinement drifted upward.
            if best_f[i] < refined.0 {
                let (t0, t1) = ranges[i];
                let dt = if samples > 1 {
                    (t1 - t0) / (samples - 1) as f64
                } else {
                    0.0
                };
                (best_f[i], rays[i].at(t0 + best_k[i] as f64 * dt))
            } else {
                refined
            }
        })
        .collect()
}

pub fn min_sdf_on_ray(
    field: &dyn SdfField,
    ray: &Ray,
    bbox: &Aabb,
    samples: usize,
) -> (f64, Vector3<f64>) {
    min_sdf_on_rays(field, std::slice::from_ref(ray), bbox, samples).remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{intersect, AnalyticShape};

    fn sphere() -> AnalyticShape {
        AnalyticShape::sphere(Vector3::zeros(), 1.0)
    }

    fn bbox() -> Aabb {
        Aabb::centered_cube(1.5)
    }

    #[test]
    fn matches_analytic_intersection() {
        let shape = sphere();
        for k in 0..100 {
            let a = k as f64 * 0.0628;
            let origin = Vector3::new(2.5 * a.cos(), 2.5 * a.sin(), 0.4 * a.sin());
            let ray = Ray::new(origin, -origin).unwrap();
            let exact = intersect(&shape, &ray).unwrap();
            let traced = sphere_trace(&shape, &ray, &bbox());
            match (exact, traced) {
                (Some(e), Some(t)) => {
                    assert!((e.distance - t.distance).abs() < 1e-4);
                    assert!((e.point - t.point).norm() < 1e-4);
                    assert!(t.value.abs() < HIT_EPS);
                }
                (None, None) => {}
                (e, t) => panic!("disagreement: exact {e:?} vs traced {t:?}"),
            }
        }
    }

    #[test]
    fn miss_for_ray_pointing_away() {
        let ray = Ray::new(Vector3::new(0.0, 0.0, 3.0), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(sphere_trace(&sphere(), &ray, &bbox()).is_none());
    }

    #[test]
    fn min_on_ray_equals_line_distance_for_sphere() {
        // For a ray passing the unit sphere at offset d > 1, the minimum of
        // the SDF along the ray is d - 1.
        for &offset in &[1.1, 1.2, 1.4] {
            let ray = Ray::new(
                Vector3::new(offset, 0.0, -3.0),
                Vector3::new(0.0, 0.0, 1.0),
            )
            .unwrap();
            let bounds = Aabb::centered_cube(3.0);
            let (fmin, pmin) = min_sdf_on_ray(&sphere(), &ray, &bounds, MIN_RAY_SAMPLES);
            assert!(
                (fmin - (offset - 1.0)).abs() < 1e-6,
                "offset {offset}: fmin {fmin}"
            );
            assert!((pmin.z).abs() < 1e-3, "closest point z {}", pmin.z);
        }
    }

    #[test]
    fn min_on_hitting_ray_is_negative() {
        let ray = Ray::new(Vector3::new(0.2, 0.0, -3.0), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let (fmin, _) = min_sdf_on_ray(&sphere(), &ray, &Aabb::centered_cube(3.0), 64);
        assert!(fmin < -0.5);
    }
}
