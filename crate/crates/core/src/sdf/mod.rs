//! Neural implicit signed-distance representation: positional encoding,
//! softplus MLP with an input skip connection, exact reverse-mode
//! differentiation for both spatial and parameter gradients, Adam, sphere
//! tracing against the field, and marching-cubes mesh extraction.

mod adam;
mod autodiff;
mod encoding;
mod field;
mod marching;
mod mc_tables;
mod network;
mod scalar;
mod trace;

pub use adam::AdamState;
pub use autodiff::{sigmoid_stable, softplus_stable, Gradients, Tape, Var};
pub use encoding::{encode_batch, encode_dim, encode_jacobian_batch};
pub use field::SdfField;
pub use marching::{marching_cubes, TriangleMesh};
pub use network::{NetworkConfig, SdfNetwork, TapedNetwork};
pub use scalar::Real;
pub use trace::{
    min_sdf_on_ray, min_sdf_on_rays, sphere_trace, sphere_trace_batch, FieldHit, HIT_EPS,
    MIN_RAY_SAMPLES,
};
