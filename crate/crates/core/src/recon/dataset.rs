use crate::error::{Error, Result};
use crate::image::{Mask, PolarimetricImage};
use crate::scene::{Aabb, CameraView};

/// One view's observation: camera pose, AoLP image and silhouette mask.
#[derive(Debug, Clone)]
pub struct ViewObservation {
    pub camera: CameraView,
    pub aolp: PolarimetricImage,
    pub mask: Mask,
}

impl ViewObservation {
    /// AoLP at the pixel containing continuous image coordinates `(u, v)`,
    /// or `None` outside the image, outside the mask, or where undefined.
    pub fn aolp_at(&self, u: f64, v: f64) -> Option<f64> {
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let (col, row) = (u as usize, v as usize);
        if col >= self.camera.width || row >= self.camera.height {
            return None;
        }
        if !self.mask.get(col, row) {
            return None;
        }
        let a = self.aolp.get(col, row, 0);
        a.is_finite().then_some(a)
    }
}

/// Multi-view AoLP observations plus the scene bounding box.
#[derive(Debug, Clone)]
pub struct MultiViewAolpDataset {
    pub views: Vec<ViewObservation>,
    pub bbox: Aabb,
}

impl MultiViewAolpDataset {
    pub fn new(views: Vec<ViewObservation>, bbox: Aabb) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::Domain(format!(
                "reconstruction needs at least 2 views, got {}",
                views.len()
            )));
        }
        let (w, h) = (views[0].camera.width, views[0].camera.height);
        for (i, v) in views.iter().enumerate() {
            if v.camera.width != w || v.camera.height != h {
                return Err(Error::ShapeMismatch(format!(
                    "view {i} size {}x{} differs from {}x{}",
                    v.camera.width, v.camera.height, w, h
                )));
            }
            if v.aolp.width != w || v.aolp.height != h || v.mask.width != w || v.mask.height != h {
                return Err(Error::ShapeMismatch(format!("view {i} raster sizes differ")));
            }
            // AoLP must be undefined outside the silhouette.
            for row in 0..h {
                for col in 0..w {
                    if !v.mask.get(col, row) && v.aolp.get(col, row, 0).is_finite() {
                        return Err(Error::ShapeMismatch(format!(
                            "view {i}: AoLP defined outside the mask at ({col},{row})"
                        )));
                    }
                }
            }
        }
        Ok(Self { views, bbox })
    }

    pub fn width(&self) -> usize {
        self.views[0].camera.width
    }

    pub fn height(&self) -> usize {
        self.views[0].camera.height
    }

    pub fn total_mask_pixels(&self) -> usize {
        self.views.iter().map(|v| v.mask.count()).sum()
    }
}
