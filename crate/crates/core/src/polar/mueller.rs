use std::f64::consts::FRAC_PI_2;
use std::ops::Mul;

use nalgebra::Matrix4;

use super::stokes::StokesVector;

/// 4x4 linear map on Stokes vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuellerMatrix(pub Matrix4<f64>);

impl MuellerMatrix {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// Frame rotation by `phi`:
    ///
    /// ```text
    /// [ 1    0        0     0 ]
    /// [ 0  cos2p   -sin2p   0 ]
    /// [ 0  sin2p    cos2p   0 ]
    /// [ 0    0        0     1 ]
    /// ```
    ///
    /// Periodic with period pi; `rotation(0)` is the identity.
    pub fn rotation(phi: f64) -> Self {
        let (s, c) = (2.0 * phi).sin_cos();
        Self(Matrix4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, c, -s, 0.0, //
            0.0, s, c, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ))
    }

    /// Ideal depolarizer keeping a proportion `rho` of the intensity and
    /// discarding all polarization.
    pub fn depolarizer(rho: f64) -> Self {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = rho;
        Self(m)
    }

    pub fn apply(&self, s: &StokesVector) -> StokesVector {
        StokesVector(self.0 * s.0)
    }
}

impl Mul for MuellerMatrix {
    type Output = MuellerMatrix;
    fn mul(self, rhs: MuellerMatrix) -> MuellerMatrix {
        MuellerMatrix(self.0 * rhs.0)
    }
}

impl Mul<StokesVector> for MuellerMatrix {
    type Output = StokesVector;
    fn mul(self, rhs: StokesVector) -> StokesVector {
        self.apply(&rhs)
    }
}

/// Rotation taking surface-frame Stokes vectors into the image frame.
///
/// The surface frame anchors `+s1` to the s-direction, which lies
/// perpendicular to the projected surface normal in the image plane. The
/// projected azimuth `phi` is measured from the image vertical axis, and the
/// image-frame `+s1` axis is anchored to that same vertical axis, so the
/// frame angle between the two bases is `phi + pi/2`.
pub fn surface_to_image_rotation(phi: f64) -> MuellerMatrix {
    MuellerMatrix::rotation(phi + FRAC_PI_2)
}
