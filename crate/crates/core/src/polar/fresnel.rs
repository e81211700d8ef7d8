use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix4;

use super::mueller::MuellerMatrix;
use crate::error::{Error, Result};

/// Non-absorbing dielectric: relative refractive index and depolarization
/// proportion for the diffuse term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dielectric {
    eta: f64,
    rho: f64,
}

impl Dielectric {
    /// `eta >= 1` (object in air) and `rho` in `[0, 1]`.
    pub fn new(eta: f64, rho: f64) -> Result<Self> {
        if !eta.is_finite() || eta < 1.0 {
            return Err(Error::Domain(format!(
                "refractive index must be >= 1 for an object in air, got {eta}"
            )));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!(
                "depolarization proportion must be in [0, 1], got {rho}"
            )));
        }
        Ok(Self { eta, rho })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

fn check_zenith(theta: f64) -> Result<()> {
    if !theta.is_finite() || !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(Error::Domain(format!(
            "zenith angle must lie in [0, pi/2), got {theta}"
        )));
    }
    Ok(())
}

/// Refraction angle from Snell's law, `asin(sin(theta) / eta)`.
pub fn refraction_angle(theta: f64, eta: f64) -> Result<f64> {
    check_zenith(theta)?;
    let s = theta.sin() / eta;
    if s > 1.0 {
        return Err(Error::Domain(format!(
            "total internal reflection: sin(theta)/eta = {s} > 1"
        )));
    }
    Ok(s.asin())
}

/// Fresnel intensity reflectances `(r_s, r_p)` for s- and p-polarization.
pub fn reflectance(theta: f64, eta: f64) -> Result<(f64, f64)> {
    let tp = refraction_angle(theta, eta)?;
    let (ci, ct) = (theta.cos(), tp.cos());
    let rs = ((ci - eta * ct) / (ci + eta * ct)).powi(2);
    let rp = ((ct - eta * ci) / (ct + eta * ci)).powi(2);
    Ok((rs, rp))
}

/// Fresnel transmittance coefficients `(t_s, t_p)`.
pub fn transmittance(theta: f64, eta: f64) -> Result<(f64, f64)> {
    let tp = refraction_angle(theta, eta)?;
    let (ci, ct) = (theta.cos(), tp.cos());
    let ts = (2.0 * ci / (ci + eta * ct)).powi(2);
    let tpp = (2.0 * ci / (ct + eta * ci)).powi(2);
    Ok((ts, tpp))
}

/// Angle at which `r_p` vanishes, `atan(eta)`.
pub fn brewster_angle(eta: f64) -> f64 {
    eta.atan()
}

/// Mueller matrix for specular reflection at zenith `theta`.
///
/// Block structure with `r+- = (r_s +- r_p)/2`, `rx = sqrt(r_s r_p)` and the
/// lower-right block carrying `cos(delta) = -1` below Brewster's angle and
/// `+1` above (`sin(delta) = 0` for a lossless dielectric).
pub fn reflection_matrix(theta: f64, eta: f64) -> Result<MuellerMatrix> {
    let (rs, rp) = reflectance(theta, eta)?;
    let rplus = 0.5 * (rs + rp);
    let rminus = 0.5 * (rs - rp);
    let rcross = (rs * rp).sqrt();
    let cos_delta = if theta < brewster_angle(eta) { -1.0 } else { 1.0 };
    let d = rcross * cos_delta;
    Ok(MuellerMatrix(Matrix4::new(
        rplus, rminus, 0.0, 0.0, //
        rminus, rplus, 0.0, 0.0, //
        0.0, 0.0, d, 0.0, //
        0.0, 0.0, 0.0, d,
    )))
}

/// Mueller matrix for transmission through the interface (no phase flip, so
/// the lower-right block is `+sqrt(t_s t_p)`).
pub fn transmission_matrix(theta: f64, eta: f64) -> Result<MuellerMatrix> {
    let (ts, tp) = transmittance(theta, eta)?;
    let tplus = 0.5 * (ts + tp);
    let tminus = 0.5 * (ts - tp);
    let tcross = (ts * tp).sqrt();
    Ok(MuellerMatrix(Matrix4::new(
        tplus, tminus, 0.0, 0.0, //
        tminus, tplus, 0.0, 0.0, //
        0.0, 0.0, tcross, 0.0, //
        0.0, 0.0, 0.0, tcross,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::StokesVector;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn normal_incidence_reflectance() {
        let (rs, rp) = reflectance(0.0, 1.5).unwrap();
        let expected = ((1.0 - 1.5f64) / (1.0 + 1.5)).powi(2);
        assert!((rs - expected).abs() < 1e-15);
        assert!((rp - expected).abs() < 1e-15);
        assert!((expected - 0.04).abs() < 1e-15);
    }

    #[test]
    fn p_reflectance_vanishes_at_brewster() {
        let theta_b = brewster_angle(1.5);
        assert!((theta_b - 0.982793723247329).abs() < 1e-12);
        let (_, rp) = reflectance(theta_b, 1.5).unwrap();
        assert!(rp < 1e-10, "r_p at Brewster = {rp}");
    }

    #[test]
    fn brewster_located_by_numeric_minimization() {
        // Golden-section search over r_p agrees with atan(eta) to 1e-8.
        for &eta in &[1.3, 1.5, 2.0] {
            let f = |t: f64| reflectance(t, eta).unwrap().1;
            let (mut lo, mut hi) = (0.0f64, FRAC_PI_2 - 1e-9);
            let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
            while hi - lo > 1e-12 {
                let a = hi - inv_phi * (hi - lo);
                let b = lo + inv_phi * (hi - lo);
                if f(a) < f(b) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            let argmin = 0.5 * (lo + hi);
            assert!(
                (argmin - brewster_angle(eta)).abs() < 1e-8,
                "eta={eta}: argmin {argmin} vs atan {}",
                brewster_angle(eta)
            );
        }
    }

    #[test]
    fn reflectance_at_quarter_pi() {
        let (rs, rp) = reflectance(FRAC_PI_4, 1.5).unwrap();
        assert!((rs - 0.0920133630455244).abs() < 1e-14);
        assert!((rp - 0.008466458978947489).abs() < 1e-14);
    }

    #[test]
    fn s_dominates_p_everywhere() {
        for k in 0..500 {
            let theta = k as f64 / 500.0 * (FRAC_PI_2 - 1e-6);
            let (rs, rp) = reflectance(theta, 1.5).unwrap();
            assert!(rs >= rp, "r_s < r_p at theta={theta}");
            assert!((0.0..=1.0).contains(&rs) && (0.0..=1.0).contains(&rp));
        }
    }

    #[test]
    fn normal_incidence_transmittance() {
        let (ts, tp) = transmittance(0.0, 1.5).unwrap();
        let expected = (2.0f64 / 2.5).powi(2);
        assert!((ts - expected).abs() < 1e-15);
        assert!((tp - expected).abs() < 1e-15);
        assert!((expected - 0.64).abs() < 1e-15);
    }

    #[test]
    fn transmittance_at_quarter_pi() {
        let (ts, tp) = transmittance(FRAC_PI_4, 1.5).unwrap();
        assert!((ts - 0.4853392724646776).abs() < 1e-14);
        assert!((tp - 0.5299969711422206).abs() < 1e-14);
    }

    #[test]
    fn p_transmittance_dominates_off_normal() {
        for k in 1..500 {
            let theta = k as f64 / 500.0 * (FRAC_PI_2 - 1e-6);
            let (ts, tp) = transmittance(theta, 1.5).unwrap();
            assert!(tp > ts, "t_p <= t_s at theta={theta}");
        }
    }

    #[test]
    fn specular_matrix_at_normal_incidence() {
        let m = reflection_matrix(0.0, 1.5).unwrap();
        assert!((m.0[(0, 0)] - 0.04).abs() < 1e-15);
        assert!(m.0[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn specular_dolp_reads_off_first_column() {
        let theta = 0.6;
        let m = reflection_matrix(theta, 1.5).unwrap();
        let out = m.apply(&StokesVector::unpolarized(1.0));
        let (rs, rp) = reflectance(theta, 1.5).unwrap();
        let expected = (0.5 * (rs - rp)).abs() / (0.5 * (rs + rp));
        assert!((out.dolp().unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn retarder_block_flips_sign_across_brewster() {
        let theta_b = brewster_angle(1.5);
        let below = reflection_matrix(theta_b - 1e-3, 1.5).unwrap();
        let above = reflection_matrix(theta_b + 1e-3, 1.5).unwrap();
        assert!(below.0[(2, 2)] < 0.0);
        assert!(above.0[(2, 2)] > 0.0);
    }

    #[test]
    fn domain_error_outside_range() {
        assert!(reflectance(FRAC_PI_2, 1.5).is_err());
        assert!(reflectance(-0.1, 1.5).is_err());
        assert!(reflectance(f64::NAN, 1.5).is_err());
    }

    #[test]
    fn dielectric_constructor_validates() {
        assert!(Dielectric::new(0.9, 1.0).is_err());
        assert!(Dielectric::new(1.5, 1.5).is_err());
        assert!(Dielectric::new(1.5, -0.1).is_err());
        let d = Dielectric::new(1.5, 0.7).unwrap();
        assert_eq!(d.eta(), 1.5);
        assert_eq!(d.rho(), 0.7);
    }
}
