use crate::error::{Error, Result};
use crate::sdf::NetworkConfig;

/// How the per-view visibility indicator is computed during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisibilityTest {
    /// Sphere-trace the pixel ray and require the traced depth to match the
    /// point's depth within `tau_vis`.
    DepthTraced,
    /// Cheap front-facing test (exact for convex scenes).
    FrontFacing,
}

/// Training hyperparameters. The defaults are the published schedule:
/// silhouette weight 50 halved every 10 epochs, Eikonal weight 0.1,
/// learning rate 1e-3, 4096-pixel batches, 50 epochs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub epochs: usize,
    pub batch_pixels: usize,
    pub lr: f64,
    pub silhouette_halving_period: usize,
    /// Initial sigmoid sharpness; doubled at each silhouette halving so the
    /// product of weight and sharpness stays level.
    pub alpha: f64,
    pub seed: u64,
    /// Use the min-over-hypotheses tangent loss that tolerates per-pixel
    /// quarter-turn AoLP ambiguity.
    pub ambiguous: bool,

    // Sampling budgets per batch.
    pub max_tsc_points: usize,
    pub silhouette_rays: usize,
    pub eikonal_samples: usize,
    /// Uniform samples for the per-ray minimum search.
    pub ray_samples: usize,
    /// Views entering the tangent term each batch; 0 means all.
    pub tsc_views_per_batch: usize,

    pub visibility: VisibilityTest,
    pub tau_vis: f64,
    /// Deterministic gradient reduction (fixed chunk order). Disabling it
    /// permits unordered parallel reduction; results may differ in the last
    /// float bits between runs.
    pub ordered_reduction: bool,

    pub network: NetworkConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda1: 50.0,
            lambda2: 0.1,
            epochs: 50,
            batch_pixels: 4096,
            lr: 1e-3,
            silhouette_halving_period: 10,
            alpha: 50.0,
            seed: 0,
            ambiguous: false,
            max_tsc_points: 768,
            silhouette_rays: 512,
            eikonal_samples: 1024,
            ray_samples: 64,
            tsc_views_per_batch: 0,
            visibility: VisibilityTest::DepthTraced,
            tau_vis: 5e-3,
            ordered_reduction: true,
            network: NetworkConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lr", self.lr),
            ("alpha", self.alpha),
            ("tau_vis", self.tau_vis),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.batch_pixels == 0 || self.silhouette_halving_period == 0 {
            return Err(Error::Config(
                "batch_pixels and silhouette_halving_period must be positive".into(),
            ));
        }
        if self.ray_samples < 2 {
            return Err(Error::Config("ray_samples must be at least 2".into()));
        }
        Ok(())
    }

    /// Silhouette weight at the given epoch (halved every period).
    pub fn lambda1_at(&self, epoch: usize) -> f64 {
        self.lambda1 * 0.5f64.powi((epoch / self.silhouette_halving_period) as i32)
    }

    /// Sigmoid sharpness at the given epoch (doubled every period).
    pub fn alpha_at(&self, epoch: usize) -> f64 {
        self.alpha * 2.0f64.powi((epoch / self.silhouette_halving_period) as i32)
    }
}
