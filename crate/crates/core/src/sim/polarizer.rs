use crate::error::{Error, Result};
use crate::image::{ImageKind, PolarimetricImage};

/// Intensity behind an ideal linear analyzer at angle `alpha`:
/// `I(alpha) = (s0 + s1 cos 2a + s2 sin 2a) / 2`.
pub fn polarizer_images(
    stokes: &PolarimetricImage,
    angles: &[f64],
) -> Result<Vec<PolarimetricImage>> {
    if stokes.kind != ImageKind::Stokes3 {
        return Err(Error::ShapeMismatch(
            "polarizer_images expects a Stokes image".into(),
        ));
    }
    let (w, h) = (stokes.width, stokes.height);
    Ok(angles
        .iter()
        .map(|&alpha| {
            let (s2a, c2a) = (2.0 * alpha).sin_cos();
            let mut img = PolarimetricImage::new_masked(ImageKind::Intensity, w, h);
            img.mask = stokes.mask.clone();
            for row in 0..h {
                for col in 0..w {
                    if !stokes.mask.get(col, row) {
                        continue;
                    }
                    let px = stokes.pixel(col, row);
                    img.set(col, row, 0, 0.5 * (px[0] + px[1] * c2a + px[2] * s2a));
                }
            }
            img
        })
        .collect())
}

/// Stokes estimate from the four canonical analyzer angles:
/// `s0 = I0 + I90`, `s1 = I0 - I90`, `s2 = I45 - I135`.
pub fn estimate_stokes(
    i0: &PolarimetricImage,
    i45: &PolarimetricImage,
    i90: &PolarimetricImage,
    i135: &PolarimetricImage,
) -> Result<PolarimetricImage> {
    let (w, h) = (i0.width, i0.height);
    for img in [i45, i90, i135] {
        if img.width != w || img.height != h {
            return Err(Error::ShapeMismatch(
                "polarizer images must share dimensions".into(),
            ));
        }
    }
    let mut out = PolarimetricImage::new_masked(ImageKind::Stokes3, w, h);
    out.mask = i0.mask.clone();
    for row in 0..h {
        for col in 0..w {
            if !out.mask.get(col, row) {
                continue;
            }
            let (a, b, c, d) = (
                i0.get(col, row, 0),
                i45.get(col, row, 0),
                i90.get(col, row, 0),
                i135.get(col, row, 0),
            );
            out.set(col, row, 0, a + c);
            out.set(col, row, 1, a - c);
            out.set(col, row, 2, b - d);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn single_pixel_stokes(s0: f64, s1: f64, s2: f64) -> PolarimetricImage {
        let mut img = PolarimetricImage::new_masked(ImageKind::Stokes3, 1, 1);
        img.mask.set(0, 0, true);
        img.set(0, 0, 0, s0);
        img.set(0, 0, 1, s1);
        img.set(0, 0, 2, s2);
        img
    }

    #[test]
    fn fully_polarized_horizontal_extremes() {
        let s = single_pixel_stokes(1.0, 1.0, 0.0);
        let imgs = polarizer_images(&s, &[0.0, FRAC_PI_2]).unwrap();
        assert!((imgs[0].get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!(imgs[1].get(0, 0, 0).abs() < 1e-15);
    }

    #[test]
    fn unpolarized_passes_half() {
        let s = single_pixel_stokes(1.0, 0.0, 0.0);
        for alpha in [0.0, 0.3, FRAC_PI_4, 1.1] {
            let img = polarizer_images(&s, &[alpha]).unwrap().remove(0);
            assert!((img.get(0, 0, 0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn analyzer_is_pi_periodic_and_partitions_intensity() {
        let s = single_pixel_stokes(2.0, 0.4, -0.3);
        let imgs = polarizer_images(&s, &[0.7, 0.7 + PI, 0.0, FRAC_PI_2]).unwrap();
        assert!((imgs[0].get(0, 0, 0) - imgs[1].get(0, 0, 0)).abs() < 1e-12);
        let total = imgs[2].get(0, 0, 0) + imgs[3].get(0, 0, 0);
        assert!((total - 2.0).abs() < 1e-15);
    }

    #[test]
    fn estimator_recovers_linear_relations() {
        let mk = |v: f64| {
            let mut img = PolarimetricImage::new_masked(ImageKind::Intensity, 1, 1);
            img.mask.set(0, 0, true);
            img.set(0, 0, 0, v);
            img
        };
        let s = estimate_stokes(&mk(0.6), &mk(0.55), &mk(0.4), &mk(0.45)).unwrap();
        assert!((s.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((s.get(0, 0, 1) - 0.2).abs() < 1e-15);
        assert!((s.get(0, 0, 2) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_identity() {
        let s = single_pixel_stokes(1.7, 0.21, -0.37);
        let angles = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];
        let imgs = polarizer_images(&s, &angles).unwrap();
        let rec = estimate_stokes(&imgs[0], &imgs[1], &imgs[2], &imgs[3]).unwrap();
        for c in 0..3 {
            assert!((rec.get(0, 0, c) - s.get(0, 0, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = PolarimetricImage::new_masked(ImageKind::Intensity, 2, 2);
        let b = PolarimetricImage::new_masked(ImageKind::Intensity, 3, 2);
        assert!(estimate_stokes(&a, &a, &a, &b).is_err());
    }
}
