use std::f64::consts::PI;

use crate::error::{Error, Result};

/// What a raster holds. Stokes and normal images carry three channels, the
/// rest one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    /// Linear Stokes components (s0, s1, s2); the emission model produces
    /// s3 = 0 identically so it is never stored.
    Stokes3,
    Aolp,
    Dolp,
    Intensity,
    Normal3,
    Depth,
}

impl ImageKind {
    pub fn channels(&self) -> usize {
        match self {
            ImageKind::Stokes3 | ImageKind::Normal3 => 3,
            _ => 1,
        }
    }
}

/// Per-pixel validity bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Row-major raster with a validity mask. Pixels are computed in double
/// precision; narrowing to 32-bit floats happens at file I/O. Masked-out
/// pixels carry NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarimetricImage {
    pub kind: ImageKind,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub mask: Mask,
}

impl PolarimetricImage {
    pub fn new_masked(kind: ImageKind, width: usize, height: usize) -> Self {
        Self {
            kind,
            width,
            height,
            data: vec![f64::NAN; width * height * kind.channels()],
            mask: Mask::new(width, height, false),
        }
    }

    pub fn channels(&self) -> usize {
        self.kind.channels()
    }

    pub fn get(&self, col: usize, row: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels() + channel]
    }

    pub fn set(&mut self, col: usize, row: usize, channel: usize, value: f64) {
        let c = self.channels();
        self.data[(row * self.width + col) * c + channel] = value;
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f64] {
        let c = self.channels();
        let base = (row * self.width + col) * c;
        &self.data[base..base + c]
    }

    /// Check the representation invariants: masked-out pixels are NaN, AoLP
    /// values lie in `[0, pi)`, DoLP in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.mask.width != self.width || self.mask.height != self.height {
            return Err(Error::ShapeMismatch("mask/image size".into()));
        }
        for row in 0..self.height {
            for col in 0..self.width {
                let valid = self.mask.get(col, row);
                let px = self.pixel(col, row);
                if !valid {
                    if px.iter().any(|v| !v.is_nan()) {
                        return Err(Error::ShapeMismatch(format!(
                            "masked-out pixel ({col},{row}) is not NaN"
                        )));
                    }
                    continue;
                }
                match self.kind {
                    ImageKind::Aolp => {
                        let a = px[0];
                        // NaN inside the mask marks an undefined AoLP pixel.
                        if !a.is_nan() && !(0.0..PI).contains(&a) {
                            return Err(Error::ShapeMismatch(format!(
                                "aolp {a} out of [0, pi) at ({col},{row})"
                            )));
                        }
                    }
                    ImageKind::Dolp => {
                        let d = px[0];
                        if !(0.0..=1.0 + 1e-12).contains(&d) {
                            return Err(Error::ShapeMismatch(format!(
                                "dolp {d} out of [0, 1] at ({col},{row})"
                            )));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_pixels_start_as_nan() {
        let img = PolarimetricImage::new_masked(ImageKind::Stokes3, 4, 3);
        assert_eq!(img.data.len(), 4 * 3 * 3);
        assert!(img.data.iter().all(|v| v.is_nan()));
        assert!(img.validate().is_ok());
    }

    #[test]
    fn validate_rejects_out_of_range_dolp() {
        let mut img = PolarimetricImage::new_masked(ImageKind::Dolp, 2, 2);
        img.mask.set(0, 0, true);
        img.set(0, 0, 0, 1.5);
        assert!(img.validate().is_err());
        img.set(0, 0, 0, 0.5);
        assert!(img.validate().is_ok());
    }

    #[test]
    fn validate_rejects_values_in_masked_pixels() {
        let mut img = PolarimetricImage::new_masked(ImageKind::Depth, 2, 2);
        img.set(1, 1, 0, 3.0);
        assert!(img.validate().is_err());
    }
}
