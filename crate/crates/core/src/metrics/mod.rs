//! Evaluation toolkit: ICP alignment, Chamfer distance, and mean angular
//! error of normal maps.

mod cloud;
mod icp;
mod kdtree;
mod normals;

pub use cloud::{chamfer, PointCloud, RigidTransform};
pub use icp::{icp_align, IcpResult};
pub use kdtree::KdTree;
pub use normals::normal_mae;
