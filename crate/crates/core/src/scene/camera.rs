use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::ray::Ray;
use crate::error::{Error, Result};

/// Pinhole camera: intrinsics plus world-to-camera rotation/translation.
///
/// A world point maps to the camera frame as `x_cam = R x + t`; the rows of
/// `R` are the camera right (`r1`), down (`r2`) and forward (`r3`) axes.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraView {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::Domain(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        let gram = rotation * rotation.transpose();
        let ortho_err = (gram - Matrix3::identity())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if ortho_err > 1e-10 {
            return Err(Error::Degenerate(format!(
                "rotation is not orthonormal (max |R R^T - I| = {ortho_err:.3e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::Degenerate(
                "rotation must have determinant +1".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera right axis (first row of `R`).
    pub fn r1(&self) -> Vector3<f64> {
        self.rotation.row(0).transpose()
    }

    /// Camera down axis (second row of `R`).
    pub fn r2(&self) -> Vector3<f64> {
        self.rotation.row(1).transpose()
    }

    /// Optical axis (third row of `R`).
    pub fn r3(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Project a world point to continuous image coordinates.
    /// Returns `None` when the point lies at or behind the camera plane.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        let pc = self.rotation * p + self.translation;
        if pc.z <= 1e-12 {
            return None;
        }
        Some((
            self.fx * pc.x / pc.z + self.cx,
            self.fy * pc.y / pc.z + self.cy,
        ))
    }

    /// World-space ray through continuous image coordinates `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Result<Ray> {
        if !(0.0..self.width as f64).contains(&u) || !(0.0..self.height as f64).contains(&v) {
            return Err(Error::Domain(format!(
                "pixel ({u}, {v}) outside {}x{} image",
                self.width, self.height
            )));
        }
        let dir_cam = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let dir_world = self.rotation.transpose() * dir_cam;
        Ray::new(self.center(), dir_world)
    }

    /// Ray through the center of the integer pixel `(col, row)`.
    pub fn pixel_center_ray(&self, col: usize, row: usize) -> Result<Ray> {
        self.pixel_ray(col as f64 + 0.5, row as f64 + 0.5)
    }
}

/// Projected azimuth of a surface normal: the angle in `[0, pi)` between the
/// image vertical axis and the normal projected onto the image plane,
/// `atan2(r1. n, r2 . n)` folded mod pi.
///
/// Satisfies `r1.n cos(phi) - r2.n sin(phi) = 0` by construction. Errors when
/// the projected normal vanishes (normal parallel to the optical axis).
pub fn projected_azimuth(normal: &Vector3<f64>, view: &CameraView) -> Result<f64> {
    let a = view.r1().dot(normal);
    let b = view.r2().dot(normal);
    if a.hypot(b) < 1e-9 {
        return Err(Error::Degenerate(
            "projected normal vanishes; azimuth undefined".into(),
        ));
    }
    let mut phi = a.atan2(b);
    if phi < 0.0 {
        phi += PI;
    }
    if phi >= PI {
        phi -= PI;
    }
    Ok(phi)
}

/// Cameras equally spaced in azimuth on a circle of the given radius and
/// elevation, all looking at `look_at`. World up is +z; camera image y points
/// downward (toward -z for an equatorial view).
pub fn turntable_poses(
    n_views: usize,
    radius: f64,
    elevation: f64,
    look_at: Vector3<f64>,
    fx: f64,
    fy: f64,
    width: usize,
    height: usize,
) -> Result<Vec<CameraView>> {
    if n_views < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 views, got {n_views}"
        )));
    }
    if radius <= 0.0 {
        return Err(Error::Domain(format!("radius must be positive: {radius}")));
    }
    if elevation.abs() >= PI / 2.0 - 1e-6 {
        return Err(Error::Degenerate(
            "elevation too close to the pole; camera up direction undefined".into(),
        ));
    }
    let up = Vector3::new(0.0, 0.0, 1.0);
    let mut views = Vec::with_capacity(n_views);
    for k in 0..n_views {
        let az = 2.0 * PI * k as f64 / n_views as f64;
        let center = look_at
            + radius * Vector3::new(az.cos() * elevation.cos(), az.sin() * elevation.cos(), elevation.sin());
        let forward = (look_at - center).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right).normalize();
        // Re-orthogonalize the last axis against accumulated rounding.
        let forward = right.cross(&down).normalize();
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -rotation * center;
        views.push(CameraView::new(
            fx,
            fy,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            rotation,
            translation,
        )?);
    }
    Ok(views)
}
