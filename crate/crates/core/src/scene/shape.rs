use nalgebra::Vector3;

use super::Aabb;

/// Analytic test shapes with signed distance and analytic gradient.
///
/// Sphere and torus distances are exact; ellipsoid and smooth union are
/// conservative bounds (still 1-Lipschitz, suitable for sphere tracing with a
/// small safety factor).
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticShape {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vector3<f64>,
        semi_axes: Vector3<f64>,
    },
    /// Torus around the z axis through `center`.
    Torus {
        center: Vector3<f64>,
        major_radius: f64,
        minor_radius: f64,
    },
    /// Smooth union of spheres with blending distance `blend`.
    SmoothUnion {
        spheres: Vec<(Vector3<f64>, f64)>,
        blend: f64,
    },
}

fn smooth_min(d1: f64, d2: f64, k: f64) -> (f64, f64) {
    let h = (0.5 + 0.5 * (d2 - d1) / k).clamp(0.0, 1.0);
    // Value and the weight of d1's gradient (d2's weight is 1 - h).
    (d2 + (d1 - d2) * h - k * h * (1.0 - h), h)
}

impl AnalyticShape {
    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Self::Sphere { center, radius }
    }

    /// Whether the distance field is exact (step factor 1.0) or a bound
    /// (traced with a safety factor).
    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Sphere { .. } | Self::Torus { .. })
    }

    pub fn sdf(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Self::Sphere { center, radius } => (p - center).norm() - radius,
            Self::Ellipsoid { center, semi_axes } => {
                let q = p - center;
                if q.norm() < 1e-12 {
                    return -semi_axes.min();
                }
                let k0 = q.component_div(semi_axes).norm();
                let k1 = q.component_div(&semi_axes.component_mul(semi_axes)).norm();
                k0 * (k0 - 1.0) / k1
            }
            Self::Torus {
                center,
                major_radius,
                minor_radius,
            } => {
                let q = p - center;
                let ring = q.x.hypot(q.y) - major_radius;
                ring.hypot(q.z) - minor_radius
            }
            Self::SmoothUnion { spheres, blend } => {
                let mut d = f64::INFINITY;
                for (c, r) in spheres {
                    let di = (p - c).norm() - r;
                    d = if d.is_infinite() {
                        di
                    } else {
                        smooth_min(di, d, *blend).0
                    };
                }
                d
            }
        }
    }

    /// Analytic gradient of the signed distance field.
    pub fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Self::Sphere { center, radius: _ } => {
                let q = p - center;
                let n = q.norm();
                if n < 1e-12 {
                    Vector3::new(0.0, 0.0, 1.0)
                } else {
                    q / n
                }
            }
            Self::Ellipsoid { center, semi_axes } => {
                let q = p - center;
                if q.norm() < 1e-12 {
                    return Vector3::new(0.0, 0.0, 1.0);
                }
                let a2 = semi_axes.component_mul(semi_axes);
                let w1 = q.component_div(&a2);
                let w2 = q.component_div(&a2.component_mul(&a2));
                let k0 = q.component_div(semi_axes).norm();
                let k1 = w1.norm();
                let grad_k0 = w1 / k0;
                let grad_k1 = w2 / k1;
                let f_num = k0 * k0 - k0;
                ((2.0 * k0 - 1.0) * grad_k0 * k1 - f_num * grad_k1) / (k1 * k1)
            }
            Self::Torus {
                center,
                major_radius,
                minor_radius: _,
            } => {
                let q = p - center;
                let rho = q.x.hypot(q.y);
                if rho < 1e-12 {
                    return Vector3::new(0.0, 0.0, q.z.signum());
                }
                let ring = rho - major_radius;
                let d = ring.hypot(q.z);
                if d < 1e-12 {
                    return Vector3::new(q.x / rho, q.y / rho, 0.0);
                }
                Vector3::new(
                    (ring / d) * (q.x / rho),
                    (ring / d) * (q.y / rho),
                    q.z / d,
                )
            }
            Self::SmoothUnion { spheres, blend } => {
                let mut d = f64::INFINITY;
                let mut g = Vector3::zeros();
                for (c, r) in spheres {
                    let q = p - c;
                    let n = q.norm();
                    let di = n - r;
                    let gi = if n < 1e-12 {
                        Vector3::new(0.0, 0.0, 1.0)
                    } else {
                        q / n
                    };
                    if d.is_infinite() {
                        d = di;
                        g = gi;
                    } else {
                        let (dv, h) = smooth_min(di, d, *blend);
                        g = h * gi + (1.0 - h) * g;
                        d = dv;
                    }
                }
                g
            }
        }
    }

    /// Center and radius of a sphere bounding the surface.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        match self {
            Self::Sphere { center, radius } => (*center, *radius),
            Self::Ellipsoid { center, semi_axes } => (*center, semi_axes.max()),
            Self::Torus {
                center,
                major_radius,
                minor_radius,
            } => (*center, major_radius + minor_radius),
            Self::SmoothUnion { spheres, blend } => {
                let c0: Vector3<f64> =
                    spheres.iter().map(|(c, _)| c).sum::<Vector3<f64>>() / spheres.len() as f64;
                let r = spheres
                    .iter()
                    .map(|(c, r)| (c - c0).norm() + r + blend)
                    .fold(0.0f64, f64::max);
                (c0, r)
            }
        }
    }

    /// Bounding box inflated by the given margin factor.
    pub fn bounding_box(&self, inflate: f64) -> Aabb {
        let (c, r) = self.bounding_sphere();
        let h = Vector3::repeat(r * inflate);
        Aabb::new(c - h, c + h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(shape: &AnalyticShape, p: &Vector3<f64>) -> Vector3<f64> {
        let h = 1e-6;
        let mut g = Vector3::zeros();
        for i in 0..3 {
            let mut a = *p;
            let mut b = *p;
            a[i] += h;
            b[i] -= h;
            g[i] = (shape.sdf(&a) - shape.sdf(&b)) / (2.0 * h);
        }
        g
    }

    fn pseudo_points(n: usize) -> Vec<Vector3<f64>> {
        let mut state = 0x12345678u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        (0..n).map(|_| Vector3::new(next(), next(), next())).collect()
    }

    #[test]
    fn sphere_sdf_and_gradient() {
        let s = AnalyticShape::sphere(Vector3::zeros(), 1.0);
        assert!((s.sdf(&Vector3::new(2.0, 0.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((s.sdf(&Vector3::zeros()) + 1.0).abs() < 1e-15);
        let g = s.gradient(&Vector3::new(0.0, 3.0, 0.0));
        assert!((g - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let shapes = vec![
            AnalyticShape::sphere(Vector3::new(0.1, -0.2, 0.0), 0.8),
            AnalyticShape::Ellipsoid {
                center: Vector3::zeros(),
                semi_axes: Vector3::new(1.0, 0.7, 0.5),
            },
            AnalyticShape::Torus {
                center: Vector3::zeros(),
                major_radius: 0.8,
                minor_radius: 0.3,
            },
            AnalyticShape::SmoothUnion {
                spheres: vec![
                    (Vector3::new(-0.4, 0.0, 0.0), 0.5),
                    (Vector3::new(0.4, 0.1, 0.0), 0.45),
                ],
                blend: 0.2,
            },
        ];
        for shape in &shapes {
            for p in pseudo_points(200) {
                let g = shape.gradient(&p);
                let fd = fd_gradient(shape, &p);
                let err = (g - fd).norm();
                assert!(err < 1e-5, "{shape:?} at {p:?}: err {err}");
            }
        }
    }

    #[test]
    fn distance_bounds_are_lipschitz() {
        // |sdf(a) - sdf(b)| <= |a - b| for bounded distance fields.
        let shapes = vec![
            AnalyticShape::Ellipsoid {
                center: Vector3::zeros(),
                semi_axes: Vector3::new(1.2, 0.6, 0.4),
            },
            AnalyticShape::SmoothUnion {
                spheres: vec![
                    (Vector3::new(-0.5, 0.0, 0.0), 0.5),
                    (Vector3::new(0.5, 0.0, 0.0), 0.5),
                ],
                blend: 0.25,
            },
        ];
        let pts = pseudo_points(100);
        for shape in &shapes {
            for pair in pts.chunks(2) {
                let (a, b) = (pair[0], pair[1]);
                let lhs = (shape.sdf(&a) - shape.sdf(&b)).abs();
                assert!(lhs <= (a - b).norm() + 1e-9);
            }
        }
    }

    #[test]
    fn torus_sdf_is_exact_on_axis_ring() {
        let t = AnalyticShape::Torus {
            center: Vector3::zeros(),
            major_radius: 1.0,
            minor_radius: 0.25,
        };
        assert!((t.sdf(&Vector3::new(1.25, 0.0, 0.0))).abs() < 1e-15);
        assert!((t.sdf(&Vector3::new(1.0, 0.0, 0.25))).abs() < 1e-15);
    }
}
