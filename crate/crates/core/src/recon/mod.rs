//! Shape reconstruction from multi-view AoLP images: tangent-space
//! consistency, silhouette and Eikonal losses, visibility handling, and the
//! training loop.

mod config;
mod dataset;
pub(crate) mod losses;
mod train;
mod visibility;

pub use config::{TrainConfig, VisibilityTest};
pub use dataset::{MultiViewAolpDataset, ViewObservation};
pub use losses::{
    eikonal_loss, silhouette_loss, tangent_vector, tsc_loss, tsc_loss_ambiguous, SilhouetteRay,
    TscValue, NORMAL_EPS,
};
pub use train::{train, EpochStats};
pub use visibility::visibility;
