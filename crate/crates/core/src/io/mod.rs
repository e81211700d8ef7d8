//! File formats: PFM/PGM rasters, camera JSON, pipeline TOML config,
//! network checkpoints, OBJ/PLY meshes, metrics and loss reports.

mod cameras;
mod checkpoint;
mod config;
mod mesh;
mod pfm;
mod report;

pub use cameras::{read_cameras, write_cameras};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{
    CaptureSection, EvalSection, MaterialSection, PathsSection, PipelineConfig, SceneSection,
    ShapeSection, SphereEntry, ThermalSection, TrainSection,
};
pub use mesh::{read_mesh, write_mesh, write_obj, write_ply};
pub use pfm::{read_pfm, read_pgm, write_pfm, write_pgm};
pub use report::{read_metrics, write_loss_csv, write_metrics, MetricsReport};
