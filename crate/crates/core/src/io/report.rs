use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::EpochStats;

/// Evaluation metrics emitted by the evaluate command.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub chamfer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_mae_deg: Option<f64>,
    pub icp_iterations: usize,
    pub icp_rmse: f64,
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Parse(format!("metrics serialization: {e}")))?;
    std::fs::write(path, json).map_err(|e| super::pfm::annotate(path, &e))?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(path).map_err(|e| super::pfm::annotate(path, &e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Loss history CSV: epoch, L_TSC, L_sil, L_eik, total.
pub fn write_loss_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| super::pfm::annotate(path, &e))?,
    );
    writeln!(w, "epoch,tsc,silhouette,eikonal,total")?;
    for s in history {
        writeln!(
            w,
            "{},{:.9e},{:.9e},{:.9e},{:.9e}",
            s.epoch, s.tsc, s.silhouette, s.eikonal, s.total
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn metrics_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        let m = MetricsReport {
            chamfer: 0.0123,
            normal_mae_deg: Some(3.4),
            icp_iterations: 12,
            icp_rmse: 1e-5,
        };
        write_metrics(&path, &m).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), m);
    }

    #[test]
    fn loss_csv_has_header_and_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_csv(
            &path,
            &[EpochStats {
                epoch: 0,
                tsc: 0.5,
                silhouette: 1.25,
                eikonal: 0.01,
                total: 63.0,
                excluded_points: 3,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,tsc,silhouette,eikonal,total\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
