//! Thermal-polarimetric light transport and multi-view shape reconstruction.
//!
//! The crate is organized around the stages of a synthetic capture-and-reconstruct
//! pipeline:
//!
//! - [`polar`] — Stokes/Mueller calculus, Fresnel coefficients, thermal emission.
//! - [`scene`] — analytic shapes, pinhole cameras, turntable poses, ray tracing.
//! - [`sim`] — the forward renderer producing per-pixel Stokes, AoLP/DoLP and
//!   polarizer-intensity images.
//! - [`sdf`] — neural signed-distance field: positional encoding, MLP, reverse-mode
//!   autodiff, Adam, sphere tracing and marching cubes.
//! - [`recon`] — tangent-space-consistency, silhouette and Eikonal losses plus the
//!   training loop that fits the SDF to multi-view AoLP observations.
//! - [`metrics`] — ICP alignment, Chamfer distance, normal angular error.
//! - [`io`] / [`pipeline`] — file formats (PFM, PGM, JSON, TOML, OBJ/PLY,
//!   checkpoints) and the four pipeline commands.

pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod polar;
pub mod recon;
pub mod scene;
pub mod sdf;
pub mod sim;

pub use error::{Error, Result};
