use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

use super::dataset::MultiViewAolpDataset;
use super::visibility::visibility;
use crate::scene::{Aabb, CameraView, Ray};
use crate::sdf::{min_sdf_on_rays, softplus_stable, SdfField};

/// Guard against vanishing gradients when normalizing normals.
pub const NORMAL_EPS: f64 = 1e-12;

/// Projected tangent vector `t = r1 cos(phi) - r2 sin(phi)`; unit length
/// because the rotation rows are orthonormal.
pub fn tangent_vector(phi: f64, view: &CameraView) -> Vector3<f64> {
    view.r1() * phi.cos() - view.r2() * phi.sin()
}

/// Outcome of a tangent-space-consistency evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TscValue {
    pub loss: f64,
    pub used_points: usize,
    /// Points visible in zero views, excluded from the mean.
    pub excluded_points: usize,
}

fn tsc_core(
    field: &dyn SdfField,
    dataset: &MultiViewAolpDataset,
    points: &[Vector3<f64>],
    tau_vis: f64,
    ambiguous: bool,
) -> TscValue {
    let mut total = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for p in points {
        let g = field.gradient_at(p);
        let n = g / (g.norm() + NORMAL_EPS);
        let mut acc = 0.0;
        let mut count = 0usize;
        for view in &dataset.views {
            if !visibility(p, field, view, &dataset.bbox, tau_vis) {
                continue;
            }
            let Some((u, v)) = view.camera.project(p) else {
                continue;
            };
            let Some(phi) = view.aolp_at(u, v) else {
                continue;
            };
            let t = tangent_vector(phi, &view.camera);
            let direct = n.dot(&t).powi(2);
            let term = if ambiguous {
                let t_alt = tangent_vector(phi + FRAC_PI_2, &view.camera);
                direct.min(n.dot(&t_alt).powi(2))
            } else {
                direct
            };
            acc += term;
            count += 1;
        }
        if count == 0 {
            excluded += 1;
        } else {
            total += acc / count as f64;
            used += 1;
        }
    }
    TscValue {
        loss: if used > 0 { total / used as f64 } else { 0.0 },
        used_points: used,
        excluded_points: excluded,
    }
}

/// Tangent-space-consistency loss: mean over surface points of the
/// visibility-weighted mean squared tangent constraint, with normals
/// normalized before the dot product.
pub fn tsc_loss(
    field: &dyn SdfField,
    dataset: &MultiViewAolpDataset,
    points: &[Vector3<f64>],
    tau_vis: f64,
) -> TscValue {
    tsc_core(field, dataset, points, tau_vis, false)
}

/// Ambiguity-tolerant variant: each point/view term takes the better of the
/// observed azimuth and its quarter-turn alternative, so observations
/// corrupted by the specular/diffuse ambiguity still vanish on the true
/// surface.
pub fn tsc_loss_ambiguous(
    field: &dyn SdfField,
    dataset: &MultiViewAolpDataset,
    points: &[Vector3<f64>],
    tau_vis: f64,
) -> TscValue {
    tsc_core(field, dataset, points, tau_vis, true)
}

/// A ray entering the silhouette loss, labeled with its mask bit.
#[derive(Debug, Clone, Copy)]
pub struct SilhouetteRay {
    pub ray: Ray,
    pub inside: bool,
}

/// Binary cross entropy between the mask label and `sigmoid(-alpha f*)`
/// where `f*` is the minimum field value along the ray (small or negative
/// `f*` means the ray grazes or enters the surface). Stable form via
/// softplus: `CE = O sp(alpha f*) + (1-O) sp(-alpha f*)`.
pub fn silhouette_loss(
    field: &dyn SdfField,
    rays: &[SilhouetteRay],
    bbox: &Aabb,
    alpha: f64,
    samples: usize,
) -> f64 {
    if rays.is_empty() {
        return 0.0;
    }
    let bare: Vec<Ray> = rays.iter().map(|r| r.ray).collect();
    let mins = min_sdf_on_rays(field, &bare, bbox, samples);
    let mut total = 0.0;
    for (r, (fstar, _)) in rays.iter().zip(mins.iter()) {
        total += if r.inside {
            softplus_stable(alpha * fstar, 1.0)
        } else {
            softplus_stable(-alpha * fstar, 1.0)
        };
    }
    total / rays.len() as f64
}

/// Eikonal regularizer: mean of `(|grad f| - 1)^2` over the samples.
pub fn eikonal_loss(field: &dyn SdfField, samples: &[Vector3<f64>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut pts = ndarray::Array2::zeros((samples.len(), 3));
    for (i, p) in samples.iter().enumerate() {
        pts[(i, 0)] = p.x;
        pts[(i, 1)] = p.y;
        pts[(i, 2)] = p.z;
    }
    let g = field.gradients(&pts);
    let mut total = 0.0;
    for row in g.rows() {
        let n = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
        total += (n - 1.0) * (n - 1.0);
    }
    total / samples.len() as f64
}
