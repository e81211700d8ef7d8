//! Polarization physics: Stokes/Mueller algebra, Fresnel reflection and
//! transmission, thermal emission via Kirchhoff's law, and the DoLP/AoLP maps.
//!
//! All quantities are computed in double precision. Angles are radians; AoLP
//! and the projected azimuth live in `[0, pi)`.

mod diffuse;
mod fresnel;
mod mueller;
mod stokes;
mod thermal;

pub use diffuse::diffuse_stokes;
pub use fresnel::{
    brewster_angle, reflectance, reflection_matrix, refraction_angle, transmission_matrix,
    transmittance, Dielectric,
};
pub use mueller::{surface_to_image_rotation, MuellerMatrix};
pub use stokes::StokesVector;
pub use thermal::{
    emission_dolp, emission_matrix, emitted_stokes, planck_radiance, zenith_from_dolp,
    ThermalState,
};
