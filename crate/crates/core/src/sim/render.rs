use rayon::prelude::*;

use crate::error::Result;
use crate::image::{ImageKind, Mask, PolarimetricImage};
use crate::polar::{
    diffuse_stokes, emitted_stokes, reflection_matrix, surface_to_image_rotation, Dielectric,
    StokesVector, ThermalState,
};
use crate::scene::{intersect, projected_azimuth, AnalyticShape, CameraView};

/// Rendering mode: thermal self-emission or the visible-light mixture of
/// diffuse and specular reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    LwirEmission,
    VisibleMixture,
}

/// Everything needed to render one dataset.
#[derive(Debug, Clone)]
pub struct RenderJob {
    pub shape: AnalyticShape,
    pub material: Dielectric,
    pub thermal: ThermalState,
    pub mode: RenderMode,
    /// Standard deviation of intensity noise relative to the per-image mean.
    pub noise_sigma: f64,
    /// Analyzer angles for the intensity images, radians.
    pub polarizer_angles: Vec<f64>,
    /// Optional ambient LWIR radiance reflected off the surface; the default
    /// 0 drops the reflection term entirely.
    pub ambient_radiance: f64,
    /// Uniform unpolarized environment radiance for the visible mixture.
    pub env_radiance: f64,
    pub seed: u64,
}

impl RenderJob {
    pub fn new(
        shape: AnalyticShape,
        material: Dielectric,
        thermal: ThermalState,
        mode: RenderMode,
    ) -> Self {
        Self {
            shape,
            material,
            thermal,
            mode,
            noise_sigma: 0.0,
            polarizer_angles: vec![],
            ambient_radiance: 0.0,
            env_radiance: 1.0,
        seed: 0,
        }
    }
}

/// One rendered view: Stokes plus ground truth, all double precision.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub stokes: PolarimetricImage,
    pub mask: Mask,
    pub gt_normal: PolarimetricImage,
    pub gt_depth: PolarimetricImage,
    /// Projected azimuth of the true surface normal; NaN where the
    /// projection degenerates (normal along the optical axis).
    pub gt_aolp: PolarimetricImage,
}

impl RenderedView {
    /// AoLP derived from the Stokes channels; NaN where undefined.
    pub fn aolp(&self) -> PolarimetricImage {
        aolp_image(&self.stokes)
    }

    /// DoLP derived from the Stokes channels.
    pub fn dolp(&self) -> PolarimetricImage {
        dolp_image(&self.stokes)
    }
}

fn derive_image(
    stokes: &PolarimetricImage,
    kind: ImageKind,
    f: impl Fn(&StokesVector) -> Option<f64>,
) -> PolarimetricImage {
    let (w, h) = (stokes.width, stokes.height);
    let mut out = PolarimetricImage::new_masked(kind, w, h);
    out.mask = stokes.mask.clone();
    for row in 0..h {
        for col in 0..w {
            if !stokes.mask.get(col, row) {
                continue;
            }
            let px = stokes.pixel(col, row);
            let s = StokesVector::new(px[0], px[1], px[2], 0.0);
            out.set(col, row, 0, f(&s).unwrap_or(f64::NAN));
        }
    }
    out
}

/// Per-pixel AoLP of a Stokes image; NaN where undefined.
pub fn aolp_image(stokes: &PolarimetricImage) -> PolarimetricImage {
    derive_image(stokes, ImageKind::Aolp, |s| s.aolp().ok())
}

/// Per-pixel DoLP of a Stokes image.
pub fn dolp_image(stokes: &PolarimetricImage) -> PolarimetricImage {
    derive_image(stokes, ImageKind::Dolp, |s| s.dolp().ok())
}

fn shade(job: &RenderJob, theta: f64, phi: f64) -> Result<StokesVector> {
    let eta = job.material.eta();
    match job.mode {
        RenderMode::LwirEmission => {
            let mut s = emitted_stokes(theta, phi, eta, &job.thermal)?;
            if job.ambient_radiance > 0.0 {
                let refl = reflection_matrix(theta, eta)?
                    * StokesVector::unpolarized(job.ambient_radiance);
                s = s + surface_to_image_rotation(phi) * refl;
            }
            Ok(s)
        }
        RenderMode::VisibleMixture => {
            let diff = diffuse_stokes(theta, phi, &job.material, job.env_radiance)?;
            let spec = surface_to_image_rotation(phi)
                * (reflection_matrix(theta, eta)? * StokesVector::unpolarized(job.env_radiance));
            Ok(diff + spec)
        }
    }
}

/// Render one view. Per hit pixel the zenith angle is the angle between the
/// surface normal and the reverse viewing direction and the azimuth is the
/// projected azimuth of the normal; misses are masked out.
pub fn render_stokes(job: &RenderJob, view: &CameraView) -> Result<RenderedView> {
    let (w, h) = (view.width, view.height);
    let mut stokes = PolarimetricImage::new_masked(ImageKind::Stokes3, w, h);
    let mut gt_normal = PolarimetricImage::new_masked(ImageKind::Normal3, w, h);
    let mut gt_depth = PolarimetricImage::new_masked(ImageKind::Depth, w, h);
    let mut gt_aolp = PolarimetricImage::new_masked(ImageKind::Aolp, w, h);
    let mut mask = Mask::new(w, h, false);

    struct RowOut {
        stokes: Vec<f64>,
        normal: Vec<f64>,
        depth: Vec<f64>,
        aolp: Vec<f64>,
        mask: Vec<bool>,
    }

    let rows: Vec<Result<RowOut>> = (0..h)
        .into_par_iter()
        .map(|row| {
            let mut out = RowOut {
                stokes: vec![f64::NAN; w * 3],
                normal: vec![f64::NAN; w * 3],
                depth: vec![f64::NAN; w],
                aolp: vec![f64::NAN; w],
                mask: vec![false; w],
            };
            for col in 0..w {
                let ray = view.pixel_center_ray(col, row)?;
                // Rays that fail to converge are treated as misses; at a
                // silhouette grazing pixel neither branch is meaningful.
                let hit = match intersect(&job.shape, &ray) {
                    Ok(Some(hit)) => hit,
                    Ok(None) | Err(_) => continue,
                };
                let cos_theta = hit.normal.dot(&(-ray.direction)).clamp(-1.0, 1.0);
                let theta = cos_theta.acos().min(std::f64::consts::FRAC_PI_2 - 1e-9);
                let phi = projected_azimuth(&hit.normal, view).ok();
                let s = shade(job, theta, phi.unwrap_or(0.0))?;
                out.mask[col] = true;
                out.stokes[col * 3..col * 3 + 3].copy_from_slice(&[s.s0(), s.s1(), s.s2()]);
                out.normal[col * 3..col * 3 + 3]
                    .copy_from_slice(&[hit.normal.x, hit.normal.y, hit.normal.z]);
                out.depth[col] = hit.distance;
                out.aolp[col] = phi.unwrap_or(f64::NAN);
            }
            Ok(out)
        })
        .collect();

    for (row, r) in rows.into_iter().enumerate() {
        let r = r?;
        stokes.data[row * w * 3..(row + 1) * w * 3].copy_from_slice(&r.stokes);
        gt_normal.data[row * w * 3..(row + 1) * w * 3].copy_from_slice(&r.normal);
        gt_depth.data[row * w..(row + 1) * w].copy_from_slice(&r.depth);
        gt_aolp.data[row * w..(row + 1) * w].copy_from_slice(&r.aolp);
        mask.data[row * w..(row + 1) * w].copy_from_slice(&r.mask);
    }

    stokes.mask = mask.clone();
    gt_normal.mask = mask.clone();
    gt_depth.mask = mask.clone();
    gt_aolp.mask = mask.clone();
    Ok(RenderedView {
        stokes,
        mask,
        gt_normal,
        gt_depth,
        gt_aolp,
    })
}
