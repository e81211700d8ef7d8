use nalgebra::Vector3;
use ndarray::{Array1, Array2, Axis};

use super::network::SdfNetwork;
use crate::scene::AnalyticShape;

/// Anything exposing a signed distance field with gradients: the neural
/// network (either precision) or an analytic shape. Tracing, mesh extraction
/// and the reconstruction losses are written against this interface so the
/// analytic shapes double as oracles.
pub trait SdfField: Sync {
    fn values(&self, pts: &Array2<f64>) -> Array1<f64>;
    fn gradients(&self, pts: &Array2<f64>) -> Array2<f64>;

    fn value_at(&self, p: &Vector3<f64>) -> f64 {
        let pts = Array2::from_shape_vec((1, 3), vec![p.x, p.y, p.z]).unwrap();
        self.values(&pts)[0]
    }

    fn gradient_at(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let pts = Array2::from_shape_vec((1, 3), vec![p.x, p.y, p.z]).unwrap();
        let g = self.gradients(&pts);
        Vector3::new(g[(0, 0)], g[(0, 1)], g[(0, 2)])
    }
}

impl SdfField for SdfNetwork<f64> {
    fn values(&self, pts: &Array2<f64>) -> Array1<f64> {
        self.eval_batch(pts)
    }
    fn gradients(&self, pts: &Array2<f64>) -> Array2<f64> {
        self.eval_with_gradient(pts).1
    }
}

impl SdfField for SdfNetwork<f32> {
    fn values(&self, pts: &Array2<f64>) -> Array1<f64> {
        let p32 = pts.mapv(|v| v as f32);
        self.eval_batch(&p32).mapv(|v| v as f64)
    }
    fn gradients(&self, pts: &Array2<f64>) -> Array2<f64> {
        let p32 = pts.mapv(|v| v as f32);
        self.eval_with_gradient(&p32).1.mapv(|v| v as f64)
    }
}

impl SdfField for AnalyticShape {
    fn values(&self, pts: &Array2<f64>) -> Array1<f64> {
        Array1::from_iter(
            pts.axis_iter(Axis(0))
                .map(|r| self.sdf(&Vector3::new(r[0], r[1], r[2]))),
        )
    }
    fn gradients(&self, pts: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((pts.nrows(), 3));
        for (i, r) in pts.axis_iter(Axis(0)).enumerate() {
            let g = self.gradient(&Vector3::new(r[0], r[1], r[2]));
            out[(i, 0)] = g.x;
            out[(i, 1)] = g.y;
            out[(i, 2)] = g.z;
        }
        out
    }
}
