use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Aabb, CameraView};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    /// Row-major 3x3 world-to-camera rotation.
    r: [f64; 9],
    t: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraSetRecord {
    views: Vec<CameraRecord>,
    bbox_min: [f64; 3],
    bbox_max: [f64; 3],
}

/// Serialize the camera set plus scene bounding box as JSON.
pub fn write_cameras(path: &Path, views: &[CameraView], bbox: &Aabb) -> Result<()> {
    let record = CameraSetRecord {
        views: views
            .iter()
            .map(|v| {
                let r = v.rotation();
                CameraRecord {
                    fx: v.fx,
                    fy: v.fy,
                    cx: v.cx,
                    cy: v.cy,
                    width: v.width,
                    height: v.height,
                    r: [
                        r[(0, 0)],
                        r[(0, 1)],
                        r[(0, 2)],
                        r[(1, 0)],
                        r[(1, 1)],
                        r[(1, 2)],
                        r[(2, 0)],
                        r[(2, 1)],
                        r[(2, 2)],
                    ],
                    t: [v.translation().x, v.translation().y, v.translation().z],
                }
            })
            .collect(),
        bbox_min: [bbox.min.x, bbox.min.y, bbox.min.z],
        bbox_max: [bbox.max.x, bbox.max.y, bbox.max.z],
    };
    let json = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Parse(format!("camera serialization: {e}")))?;
    std::fs::write(path, json).map_err(|e| super::pfm::annotate(path, &e))?;
    Ok(())
}

pub fn read_cameras(path: &Path) -> Result<(Vec<CameraView>, Aabb)> {
    let text = std::fs::read_to_string(path).map_err(|e| super::pfm::annotate(path, &e))?;
    let record: CameraSetRecord = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let views = record
        .views
        .iter()
        .map(|c| {
            let r = Matrix3::new(
                c.r[0], c.r[1], c.r[2], c.r[3], c.r[4], c.r[5], c.r[6], c.r[7], c.r[8],
            );
            CameraView::new(
                c.fx,
                c.fy,
                c.cx,
                c.cy,
                c.width,
                c.height,
                r,
                Vector3::new(c.t[0], c.t[1], c.t[2]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let bbox = Aabb::new(
        Vector3::from_row_slice(&record.bbox_min),
        Vector3::from_row_slice(&record.bbox_max),
    );
    Ok((views, bbox))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::turntable_poses;
    use tempfile::tempdir;

    #[test]
    fn camera_round_trip() {
        let dir = tempdir().unwrap();
        let views = turntable_poses(5, 3.0, 0.2, Vector3::zeros(), 180.0, 180.0, 128, 96).unwrap();
        let bbox = Aabb::centered_cube(1.5);
        let path = dir.path().join("cameras.json");
        write_cameras(&path, &views, &bbox).unwrap();
        let (back, bbox2) = read_cameras(&path).unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(bbox2, bbox);
        for (a, b) in views.iter().zip(back.iter()) {
            assert_eq!(a.width, b.width);
            assert!((a.rotation() - b.rotation()).norm() < 1e-15);
            assert!((a.translation() - b.translation()).norm() < 1e-15);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cameras.json");
        std::fs::write(&path, r#"{"views": [], "bbox_min": [0,0,0], "bbox_max": [1,1,1], "extra": 3}"#)
            .unwrap();
        assert!(read_cameras(&path).is_err());
    }
}
