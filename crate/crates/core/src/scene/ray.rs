use nalgebra::Vector3;

use crate::error::{Error, Result};

/// World-space ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes the direction; rejects near-zero vectors.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::Degenerate(format!(
                "ray direction has norm {n}, cannot normalize"
            )));
        }
        Ok(Self {
            origin,
            direction: direction / n,
        })
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + t * self.direction
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_is_normalized() {
        let r = Ray::new(Vector3::zeros(), Vector3::new(3.0, 4.0, 0.0)).unwrap();
        assert!((r.direction.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(Ray::new(Vector3::zeros(), Vector3::zeros()).is_err());
    }
}
