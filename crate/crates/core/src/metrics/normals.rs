use crate::error::{Error, Result};
use crate::image::{ImageKind, Mask, PolarimetricImage};

/// Mean angular error between two normal maps in degrees, over pixels valid
/// in the given mask and carrying finite normals in both maps.
pub fn normal_mae(
    estimated: &PolarimetricImage,
    ground_truth: &PolarimetricImage,
    mask: &Mask,
) -> Result<f64> {
    if estimated.kind != ImageKind::Normal3 || ground_truth.kind != ImageKind::Normal3 {
        return Err(Error::ShapeMismatch("normal_mae expects normal maps".into()));
    }
    if estimated.width != ground_truth.width
        || estimated.height != ground_truth.height
        || mask.width != estimated.width
        || mask.height != estimated.height
    {
        return Err(Error::ShapeMismatch(format!(
            "raster sizes differ: est {}x{}, gt {}x{}, mask {}x{}",
            estimated.width,
            estimated.height,
            ground_truth.width,
            ground_truth.height,
            mask.width,
            mask.height
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for row in 0..mask.height {
        for col in 0..mask.width {
            if !mask.get(col, row) {
                continue;
            }
            let e = estimated.pixel(col, row);
            let g = ground_truth.pixel(col, row);
            if e.iter().chain(g.iter()).any(|v| !v.is_finite()) {
                continue;
            }
            let ne = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
            let ng = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if ne < 1e-12 || ng < 1e-12 {
                continue;
            }
            let dot = ((e[0] * g[0] + e[1] * g[1] + e[2] * g[2]) / (ne * ng)).clamp(-1.0, 1.0);
            total += dot.acos();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Domain("no valid pixels for normal comparison".into()));
    }
    Ok((total / count as f64).to_degrees())
}
