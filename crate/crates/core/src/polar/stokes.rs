use std::f64::consts::PI;
use std::ops::{Add, Mul};

use nalgebra::Vector4;

use crate::error::{Error, Result};

/// Four-component polarization state `(s0, s1, s2, s3)`.
///
/// `s0` is total radiance, `s1`/`s2` the linear components (anchored to the
/// image vertical axis once in the image frame), `s3` the circular component.
/// A physically realizable vector satisfies `s0 >= 0` and
/// `sqrt(s1^2 + s2^2 + s3^2) <= s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector(pub Vector4<f64>);

impl StokesVector {
    pub fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        Self(Vector4::new(s0, s1, s2, s3))
    }

    /// Unpolarized light of the given intensity.
    pub fn unpolarized(intensity: f64) -> Self {
        Self::new(intensity, 0.0, 0.0, 0.0)
    }

    pub fn zero() -> Self {
        Self(Vector4::zeros())
    }

    pub fn s0(&self) -> f64 {
        self.0[0]
    }
    pub fn s1(&self) -> f64 {
        self.0[1]
    }
    pub fn s2(&self) -> f64 {
        self.0[2]
    }
    pub fn s3(&self) -> f64 {
        self.0[3]
    }

    /// Degree of linear polarization `sqrt(s1^2+s2^2)/s0`.
    pub fn dolp(&self) -> Result<f64> {
        if self.s0() <= 0.0 {
            return Err(Error::Domain(format!(
                "dolp requires s0 > 0, got {}",
                self.s0()
            )));
        }
        Ok(self.s1().hypot(self.s2()) / self.s0())
    }

    /// Angle of linear polarization `atan2(s2, s1) / 2`, mapped to `[0, pi)`.
    ///
    /// Undefined when `(s1, s2) == (0, 0)`; callers mask such pixels.
    pub fn aolp(&self) -> Result<f64> {
        if self.s1() == 0.0 && self.s2() == 0.0 {
            return Err(Error::UndefinedAolp);
        }
        let mut a = 0.5 * self.s2().atan2(self.s1());
        if a < 0.0 {
            a += PI;
        }
        // atan2 returning exactly pi would map to the seam; fold it to 0.
        if a >= PI {
            a -= PI;
        }
        Ok(a)
    }

    /// Physical realizability check with an absolute slack on the polarized
    /// magnitude (Mueller products accumulate rounding).
    pub fn is_realizable(&self, slack: f64) -> bool {
        let pol = (self.s1() * self.s1() + self.s2() * self.s2() + self.s3() * self.s3()).sqrt();
        self.s0() >= -slack && pol <= self.s0() + slack
    }
}

impl Add for StokesVector {
    type Output = StokesVector;
    fn add(self, rhs: StokesVector) -> StokesVector {
        StokesVector(self.0 + rhs.0)
    }
}

impl Mul<f64> for StokesVector {
    type Output = StokesVector;
    fn mul(self, rhs: f64) -> StokesVector {
        StokesVector(self.0 * rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn dolp_of_partially_polarized() {
        let s = StokesVector::new(1.0, 0.1, 0.0, 0.0);
        assert_eq!(s.dolp().unwrap(), 0.1);
        assert_eq!(s.aolp().unwrap(), 0.0);
    }

    #[test]
    fn aolp_of_diagonal_component() {
        let s = StokesVector::new(1.0, 0.0, 0.1, 0.0);
        assert!((s.aolp().unwrap() - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn aolp_negative_s1_maps_to_half_pi() {
        let s = StokesVector::new(1.0, -0.1, 0.0, 0.0);
        assert!((s.aolp().unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn aolp_undefined_for_circular_only() {
        let s = StokesVector::new(1.0, 0.0, 0.0, 0.5);
        assert!(matches!(s.aolp(), Err(Error::UndefinedAolp)));
    }

    #[test]
    fn dolp_requires_positive_intensity() {
        let s = StokesVector::new(0.0, 0.0, 0.0, 0.0);
        assert!(matches!(s.dolp(), Err(Error::Domain(_))));
    }

    #[test]
    fn aolp_range_is_half_open() {
        for k in 0..1000 {
            let ang = (k as f64 / 1000.0) * 2.0 * PI - PI;
            let s = StokesVector::new(1.0, ang.cos(), ang.sin(), 0.0);
            let a = s.aolp().unwrap();
            assert!((0.0..PI).contains(&a), "aolp {a} out of range for {ang}");
        }
    }
}
