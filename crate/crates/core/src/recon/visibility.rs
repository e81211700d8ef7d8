use nalgebra::Vector3;

use super::dataset::ViewObservation;
use crate::scene::{Aabb, Ray};
use crate::sdf::{sphere_trace, SdfField};

/// Binary visibility of a surface point from one view: the point must
/// project inside the view's silhouette mask and the sphere-traced depth
/// along its pixel ray must match the point's own depth within `tau`.
pub fn visibility(
    point: &Vector3<f64>,
    field: &dyn SdfField,
    view: &ViewObservation,
    bbox: &Aabb,
    tau: f64,
) -> bool {
    let Some((u, v)) = view.camera.project(point) else {
        return false;
    };
    if u < 0.0 || v < 0.0 {
        return false;
    }
    let (col, row) = (u as usize, v as usize);
    if col >= view.camera.width || row >= view.camera.height || !view.mask.get(col, row) {
        return false;
    }
    let center = view.camera.center();
    let Ok(ray) = Ray::new(center, point - center) else {
        return false;
    };
    match sphere_trace(field, &ray, bbox) {
        Some(hit) => (hit.distance - (point - center).norm()).abs() < tau,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ImageKind, Mask, PolarimetricImage};
    use crate::scene::{turntable_poses, AnalyticShape};

    fn full_view() -> ViewObservation {
        let cam = turntable_poses(2, 3.0, 0.0, Vector3::zeros(), 120.0, 120.0, 96, 96)
            .unwrap()
            .remove(0);
        let mut aolp = PolarimetricImage::new_masked(ImageKind::Aolp, 96, 96);
        aolp.mask = Mask::new(96, 96, true);
        aolp.data.fill(0.5);
        ViewObservation {
            camera: cam,
            aolp,
            mask: Mask::new(96, 96, true),
        }
    }

    #[test]
    fn facing_point_is_visible() {
        let sphere = AnalyticShape::sphere(Vector3::zeros(), 1.0);
        let view = full_view();
        let bbox = Aabb::centered_cube(1.5);
        // The point on the sphere nearest the camera.
        let toward = (view.camera.center()).normalize();
        assert!(visibility(&toward, &sphere, &view, &bbox, 5e-3));
    }

    #[test]
    fn antipodal_point_is_occluded() {
        let sphere = AnalyticShape::sphere(Vector3::zeros(), 1.0);
        let view = full_view();
        let bbox = Aabb::centered_cube(1.5);
        let away = -(view.camera.center().normalize());
        assert!(!visibility(&away, &sphere, &view, &bbox, 5e-3));
    }

    #[test]
    fn point_projecting_outside_is_invisible() {
        let sphere = AnalyticShape::sphere(Vector3::zeros(), 1.0);
        let mut view = full_view();
        // Shrink the camera so the point lands outside the image.
        view.camera = turntable_poses(2, 3.0, 0.0, Vector3::zeros(), 400.0, 400.0, 16, 16)
            .unwrap()
            .remove(0);
        view.mask = Mask::new(16, 16, true);
        let bbox = Aabb::centered_cube(1.5);
        let p = Vector3::new(0.0, 0.0, 1.0); // projects far off the tiny sensor
        assert!(!visibility(&p, &sphere, &view, &bbox, 5e-3));
    }

    #[test]
    fn masked_out_pixel_is_invisible() {
        let sphere = AnalyticShape::sphere(Vector3::zeros(), 1.0);
        let mut view = full_view();
        view.mask = Mask::new(96, 96, false);
        let bbox = Aabb::centered_cube(1.5);
        let toward = view.camera.center().normalize();
        assert!(!visibility(&toward, &sphere, &view, &bbox, 5e-3));
    }
}
