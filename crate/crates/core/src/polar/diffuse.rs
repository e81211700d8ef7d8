use super::fresnel::{transmission_matrix, Dielectric};
use super::mueller::surface_to_image_rotation;
use super::stokes::StokesVector;
use crate::error::Result;

/// Image-frame Stokes vector of diffuse reflection under a uniform
/// unpolarized environment.
///
/// The hemispherical integral over incoming directions collapses to the
/// scalar `env_radiance`; the depolarizer keeps `rho * env_radiance` as
/// unpolarized subsurface light, which then exits through the transmission
/// interface and is rotated into the image frame. Like emission, the result
/// is polarized parallel to the plane of incidence (AoLP = `phi`).
pub fn diffuse_stokes(
    theta: f64,
    phi: f64,
    material: &Dielectric,
    env_radiance: f64,
) -> Result<StokesVector> {
    let body = StokesVector::unpolarized(material.rho() * env_radiance);
    Ok(surface_to_image_rotation(phi) * (transmission_matrix(theta, material.eta())? * body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::transmittance;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn glassy(rho: f64) -> Dielectric {
        Dielectric::new(1.5, rho).unwrap()
    }

    #[test]
    fn zero_environment_gives_zero_stokes() {
        let s = diffuse_stokes(0.5, 1.0, &glassy(1.0), 0.0).unwrap();
        assert_eq!(s, StokesVector::zero());
    }

    #[test]
    fn normal_exit_is_unpolarized() {
        let s = diffuse_stokes(0.0, 0.3, &glassy(1.0), 1.0).unwrap();
        assert!(s.s1().abs() < 1e-15);
        assert!(s.s2().abs() < 1e-15);
        assert!(s.s0() > 0.0);
    }

    #[test]
    fn polarization_ratio_at_quarter_pi() {
        // Direct evaluation of the transmission chain: the linear fraction is
        // |t_s - t_p| / (t_s + t_p), oriented along the projected normal.
        let s = diffuse_stokes(FRAC_PI_4, 0.0, &glassy(1.0), 1.0).unwrap();
        let (ts, tp) = transmittance(FRAC_PI_4, 1.5).unwrap();
        let expected = (ts - tp).abs() / (ts + tp);
        assert!((s.dolp().unwrap() - expected).abs() < 1e-14);
        // At phi = 0 the polarization lies along the image vertical axis.
        assert!(s.aolp().unwrap().abs() < 1e-12);
        assert!((s.s1() / s.s0() - expected).abs() < 1e-14);
    }

    #[test]
    fn diffuse_aolp_tracks_azimuth() {
        for k in 0..64 {
            let phi = k as f64 / 64.0 * PI;
            let s = diffuse_stokes(0.8, phi, &glassy(1.0), 2.0).unwrap();
            let d = (s.aolp().unwrap() - phi).rem_euclid(PI);
            assert!(d.min(PI - d) < 1e-12);
        }
    }

    #[test]
    fn scales_linearly_with_environment_and_rho() {
        let a = diffuse_stokes(0.7, 0.2, &glassy(1.0), 2.0).unwrap();
        let b = diffuse_stokes(0.7, 0.2, &glassy(0.5), 4.0).unwrap();
        assert!((a.s0() - b.s0()).abs() < 1e-14);
        assert!((a.s1() - b.s1()).abs() < 1e-14);
    }
}
