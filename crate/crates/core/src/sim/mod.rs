//! Forward renderer: per-pixel Stokes, AoLP/DoLP, polarizer-angle intensity
//! images, silhouette masks and ground-truth normal/depth maps, in LWIR
//! emission mode and visible mixture mode.

mod noise;
mod polarizer;
mod render;

pub use noise::add_noise;
pub use polarizer::{estimate_stokes, polarizer_images};
pub use render::{aolp_image, dolp_image, render_stokes, RenderJob, RenderMode, RenderedView};
