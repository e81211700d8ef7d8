use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix4;

use super::fresnel::reflectance;
use super::mueller::{surface_to_image_rotation, MuellerMatrix};
use super::stokes::StokesVector;
use crate::error::{Error, Result};

// CODATA 2018 exact values.
const PLANCK_H: f64 = 6.626_070_15e-34; // J s
const LIGHT_SPEED: f64 = 299_792_458.0; // m / s
const BOLTZMANN_K: f64 = 1.380_649e-23; // J / K

/// Object temperature and observation wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState {
    temperature: f64,
    wavelength: f64,
}

impl ThermalState {
    /// Temperature in kelvin, wavelength in meters; both strictly positive.
    pub fn new(temperature: f64, wavelength: f64) -> Result<Self> {
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(Error::Domain(format!(
                "temperature must be > 0 K, got {temperature}"
            )));
        }
        if !wavelength.is_finite() || wavelength <= 0.0 {
            return Err(Error::Domain(format!(
                "wavelength must be > 0 m, got {wavelength}"
            )));
        }
        Ok(Self {
            temperature,
            wavelength,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
}

/// Blackbody spectral radiance `B(T) = (2 h c^2 / l^5) / (exp(h c / (l k T)) - 1)`
/// in W m^-3 sr^-1.
///
/// Returns 0 when the exponent exceeds 700 (the radiance underflows long
/// before `exp` overflows).
pub fn planck_radiance(state: &ThermalState) -> f64 {
    let l = state.wavelength;
    let x = PLANCK_H * LIGHT_SPEED / (l * BOLTZMANN_K * state.temperature);
    if x > 700.0 {
        return 0.0;
    }
    2.0 * PLANCK_H * LIGHT_SPEED * LIGHT_SPEED / l.powi(5) / x.exp_m1()
}

/// Mueller matrix for thermal emission. Only the first column is nonzero:
/// `(e+, e-, 0, 0)` with `e_s = 1 - r_s`, `e_p = 1 - r_p` (Kirchhoff's law,
/// transmission neglected) and `e+- = (e_s +- e_p)/2`.
pub fn emission_matrix(theta: f64, eta: f64) -> Result<MuellerMatrix> {
    let (rs, rp) = reflectance(theta, eta)?;
    let (es, ep) = (1.0 - rs, 1.0 - rp);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = 0.5 * (es + ep);
    m[(1, 0)] = 0.5 * (es - ep);
    Ok(MuellerMatrix(m))
}

/// Image-frame Stokes vector of thermal emission at zenith `theta` and
/// projected azimuth `phi`.
///
/// The emitted light is polarized parallel to the plane of incidence, so its
/// AoLP equals `phi` exactly for every `theta > 0`; `s3` is always zero.
pub fn emitted_stokes(theta: f64, phi: f64, eta: f64, state: &ThermalState) -> Result<StokesVector> {
    let radiance = StokesVector::unpolarized(planck_radiance(state));
    Ok(surface_to_image_rotation(phi) * (emission_matrix(theta, eta)? * radiance))
}

/// Degree of linear polarization of thermal emission as a function of the
/// zenith angle, `|e-| / e+ = (r_s - r_p) / (2 - r_s - r_p)`.
pub fn emission_dolp(theta: f64, eta: f64) -> Result<f64> {
    let (rs, rp) = reflectance(theta, eta)?;
    Ok((rs - rp) / (2.0 - rs - rp))
}

/// Inverse of [`emission_dolp`] by bisection (the forward map is strictly
/// increasing on `[0, pi/2)`). Diagnostic only; reconstruction uses AoLP.
pub fn zenith_from_dolp(d: f64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::Domain(format!("dolp must lie in [0, 1], got {d}")));
    }
    let hi_theta = FRAC_PI_2 - 1e-9;
    let d_max = emission_dolp(hi_theta, eta)?;
    if d > d_max {
        return Err(Error::NoSolution(format!(
            "dolp {d} exceeds the maximum {d_max} attainable for eta {eta}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, hi_theta);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if emission_dolp(mid, eta)? < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn lwir_10um(t: f64) -> ThermalState {
        ThermalState::new(t, 10e-6).unwrap()
    }

    #[test]
    fn planck_at_room_temperature() {
        // Direct evaluation with CODATA constants at T = 300 K, wavelength 10 um.
        let b = planck_radiance(&lwir_10um(300.0));
        assert!((b - 9_924_033.330070693).abs() / b < 1e-12);
    }

    #[test]
    fn planck_increases_with_temperature() {
        assert!(planck_radiance(&lwir_10um(310.0)) > planck_radiance(&lwir_10um(300.0)));
    }

    #[test]
    fn planck_underflow_guard() {
        // hc/(l k T) > 700 for T below ~2 K at 1 um.
        let s = ThermalState::new(1e-3, 1e-6).unwrap();
        assert_eq!(planck_radiance(&s), 0.0);
    }

    #[test]
    fn thermal_state_validates() {
        assert!(ThermalState::new(0.0, 1e-5).is_err());
        assert!(ThermalState::new(300.0, 0.0).is_err());
        assert!(ThermalState::new(-1.0, 1e-5).is_err());
    }

    #[test]
    fn emission_matrix_at_normal_incidence() {
        let m = emission_matrix(0.0, 1.5).unwrap();
        assert!((m.0[(0, 0)] - 0.96).abs() < 1e-14);
        assert!(m.0[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn emission_minus_at_quarter_pi() {
        let m = emission_matrix(FRAC_PI_4, 1.5).unwrap();
        assert!((m.0[(1, 0)] - (-0.04177345203328846)).abs() < 1e-14);
    }

    #[test]
    fn kirchhoff_identity() {
        for k in 0..1000 {
            let theta = k as f64 / 1000.0 * (FRAC_PI_2 - 1e-9);
            for &eta in &[1.3, 1.5, 2.0] {
                let (rs, rp) = reflectance(theta, eta).unwrap();
                let (es, ep) = (1.0 - rs, 1.0 - rp);
                assert!((rs + es - 1.0).abs() < 1e-12);
                assert!((rp + ep - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn emitted_stokes_at_normal_incidence_is_unpolarized() {
        let state = lwir_10um(300.0);
        let s = emitted_stokes(0.0, 0.7, 1.5, &state).unwrap();
        let b = planck_radiance(&state);
        assert!((s.s0() - 0.96 * b).abs() / s.s0() < 1e-12);
        assert!(s.s1().abs() < 1e-9 * b);
        assert!(s.s2().abs() < 1e-9 * b);
        assert_eq!(s.s3(), 0.0);
    }

    #[test]
    fn emitted_aolp_equals_projected_azimuth() {
        let state = lwir_10um(310.0);
        for k in 0..200 {
            let phi = k as f64 / 200.0 * PI;
            for &theta in &[0.2, FRAC_PI_4, 1.2] {
                let s = emitted_stokes(theta, phi, 1.5, &state).unwrap();
                let a = s.aolp().unwrap();
                let d = (a - phi).rem_euclid(PI);
                let d = d.min(PI - d);
                assert!(d < 1e-12, "aolp {a} vs phi {phi} (theta={theta})");
                assert_eq!(s.s3(), 0.0);
            }
        }
    }

    #[test]
    fn emitted_dolp_at_quarter_pi() {
        let state = lwir_10um(310.0);
        let s = emitted_stokes(FRAC_PI_4, 0.3, 1.5, &state).unwrap();
        assert!((s.dolp().unwrap() - 0.043983162187631826).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_pipeline() {
        let state = lwir_10um(300.0);
        for k in 1..300 {
            let theta = k as f64 / 300.0 * (FRAC_PI_2 - 1e-6);
            let via_pipeline = emitted_stokes(theta, 0.9, 1.5, &state)
                .unwrap()
                .dolp()
                .unwrap();
            let closed = emission_dolp(theta, 1.5).unwrap();
            assert!((via_pipeline - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_squared_denominator_variant() {
        // The zenith/DoLP relation written directly in terms of eta matches the
        // emission pipeline only with the squared (eta + 1/eta)^2 term in the
        // denominator; the variant with an unsquared term deviates grossly.
        let squared = |theta: f64, eta: f64| {
            let s2 = theta.sin().powi(2);
            (eta - 1.0 / eta).powi(2) * s2
                / (2.0 + 2.0 * eta * eta - (eta + 1.0 / eta).powi(2) * s2
                    + 4.0 * theta.cos() * (eta * eta - s2).sqrt())
        };
        let unsquared = |theta: f64, eta: f64| {
            let s2 = theta.sin().powi(2);
            (eta - 1.0 / eta).powi(2) * s2
                / (2.0 + 2.0 * eta * eta - (eta + 1.0 / eta) * s2
                    + 4.0 * theta.cos() * (eta * eta - s2).sqrt())
        };
        let mut max_unsquared_err = 0.0f64;
        for k in 1..500 {
            let theta = k as f64 / 500.0 * (FRAC_PI_2 - 1e-6);
            let pipeline = emission_dolp(theta, 1.5).unwrap();
            assert!((squared(theta, 1.5) - pipeline).abs() < 1e-9);
            max_unsquared_err = max_unsquared_err.max((unsquared(theta, 1.5) - pipeline).abs());
        }
        assert!(max_unsquared_err > 0.1, "variants unexpectedly agree");
    }

    #[test]
    fn emission_dolp_monotone() {
        let mut prev = -1.0;
        for k in 0..2000 {
            let theta = k as f64 / 2000.0 * (FRAC_PI_2 - 1e-6);
            let d = emission_dolp(theta, 1.5).unwrap();
            assert!(d > prev, "dolp not increasing at theta={theta}");
            prev = d;
        }
    }

    #[test]
    fn zenith_inversion_round_trip() {
        assert!(zenith_from_dolp(0.0, 1.5).unwrap().abs() < 1e-9);
        let theta = zenith_from_dolp(0.043983162187631826, 1.5).unwrap();
        assert!((theta - FRAC_PI_4).abs() < 1e-8, "theta = {theta}");
        for k in 1..50 {
            let t = k as f64 / 50.0 * 1.4;
            let d = emission_dolp(t, 1.5).unwrap();
            let back = zenith_from_dolp(d, 1.5).unwrap();
            assert!((back - t).abs() < 1e-8);
        }
    }

    #[test]
    fn zenith_inversion_rejects_unattainable_dolp() {
        assert!(matches!(
            zenith_from_dolp(1.0, 1.5),
            Err(Error::NoSolution(_))
        ));
    }
}
