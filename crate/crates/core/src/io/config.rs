use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar::{Dielectric, ThermalState};
use crate::recon::{TrainConfig, VisibilityTest};
use crate::scene::AnalyticShape;
use crate::sdf::NetworkConfig;
use crate::sim::RenderMode;

/// Whole-pipeline configuration file (TOML, strict: unknown keys error).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub scene: SceneSection,
    pub capture: CaptureSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub shape: ShapeSection,
    pub material: MaterialSection,
    pub thermal: ThermalSection,
    /// Half-extent of the cubical scene bounding box; derived from the
    /// shape when omitted.
    pub bbox_half_extent: Option<f64>,
}

/// Shape description; `kind` selects which of the remaining keys apply and
/// stray keys for other kinds are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub major_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minor_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spheres: Option<Vec<SphereEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereEntry {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub eta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_rho() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    /// Kelvin.
    pub temperature: f64,
    /// Meters.
    pub wavelength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSection {
    pub n_views: usize,
    pub image_size: [usize; 2],
    pub camera_radius: f64,
    #[serde(default)]
    pub elevation: f64,
    pub focal: f64,
    pub mode: String,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_polarizer_angles")]
    pub polarizer_angles: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ambient_radiance: f64,
    #[serde(default = "default_env_radiance")]
    pub env_radiance: f64,
}

fn default_polarizer_angles() -> Vec<f64> {
    vec![
        0.0,
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::FRAC_PI_2,
        3.0 * std::f64::consts::FRAC_PI_4,
    ]
}

fn default_env_radiance() -> f64 {
    1.0
}

/// Training keys mirror [`TrainConfig`]; every key has the published default
/// so a minimal file works.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub epochs: usize,
    pub batch_pixels: usize,
    pub lr: f64,
    pub silhouette_halving_period: usize,
    pub alpha: f64,
    pub seed: u64,
    pub ambiguous: bool,
    pub max_tsc_points: usize,
    pub silhouette_rays: usize,
    pub eikonal_samples: usize,
    pub ray_samples: usize,
    pub tsc_views_per_batch: usize,
    /// "depth" or "facing".
    pub visibility: String,
    pub tau_vis: f64,
    pub ordered_reduction: bool,
    pub width: usize,
    pub hidden_layers: usize,
    pub skip_layer: usize,
    pub frequencies: usize,
    pub softplus_beta: f64,
    pub init_radius: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let n = NetworkConfig::default();
        Self {
            lambda1: t.lambda1,
            lambda2: t.lambda2,
            epochs: t.epochs,
            batch_pixels: t.batch_pixels,
            lr: t.lr,
            silhouette_halving_period: t.silhouette_halving_period,
            alpha: t.alpha,
            seed: t.seed,
            ambiguous: t.ambiguous,
            max_tsc_points: t.max_tsc_points,
            silhouette_rays: t.silhouette_rays,
            eikonal_samples: t.eikonal_samples,
            ray_samples: t.ray_samples,
            tsc_views_per_batch: t.tsc_views_per_batch,
            visibility: "depth".into(),
            tau_vis: t.tau_vis,
            ordered_reduction: t.ordered_reduction,
            width: n.width,
            hidden_layers: n.hidden_layers,
            skip_layer: n.skip_layer,
            frequencies: n.frequencies,
            softplus_beta: n.softplus_beta,
            init_radius: n.init_radius,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub mesh_resolution: usize,
    pub cloud_samples: usize,
    pub icp_max_iters: usize,
    pub icp_tol: f64,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            mesh_resolution: 128,
            cloud_samples: 100_000,
            icp_max_iters: 60,
            icp_tol: 1e-12,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub data_dir: Option<String>,
    pub out_dir: Option<String>,
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.shape()?;
        self.material()?;
        self.thermal()?;
        self.render_mode()?;
        self.train_config()?;
        if self.capture.n_views < 2 {
            return Err(Error::Config("capture.n_views must be at least 2".into()));
        }
        if self.capture.image_size.iter().any(|&s| s < 8) {
            return Err(Error::Config("capture.image_size must be at least 8".into()));
        }
        if self.capture.noise_sigma < 0.0 {
            return Err(Error::Config("capture.noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<AnalyticShape> {
        let s = &self.scene.shape;
        let center = || Vector3::from_row_slice(&s.center.unwrap_or([0.0; 3]));
        let forbid = |fields: &[(&str, bool)]| -> Result<()> {
            for (name, present) in fields {
                if *present {
                    return Err(Error::Config(format!(
                        "scene.shape.{name} does not apply to kind {:?}",
                        s.kind
                    )));
                }
            }
            Ok(())
        };
        match s.kind.as_str() {
            "sphere" => {
                forbid(&[
                    ("semi_axes", s.semi_axes.is_some()),
                    ("major_radius", s.major_radius.is_some()),
                    ("minor_radius", s.minor_radius.is_some()),
                    ("spheres", s.spheres.is_some()),
                    ("blend", s.blend.is_some()),
                ])?;
                let radius = s
                    .radius
                    .ok_or_else(|| Error::Config("sphere requires radius".into()))?;
                Ok(AnalyticShape::Sphere {
                    center: center(),
                    radius,
                })
            }
            "ellipsoid" => {
                forbid(&[
                    ("radius", s.radius.is_some()),
                    ("major_radius", s.major_radius.is_some()),
                    ("minor_radius", s.minor_radius.is_some()),
                    ("spheres", s.spheres.is_some()),
                    ("blend", s.blend.is_some()),
                ])?;
                let semi = s
                    .semi_axes
                    .ok_or_else(|| Error::Config("ellipsoid requires semi_axes".into()))?;
                Ok(AnalyticShape::Ellipsoid {
                    center: center(),
                    semi_axes: Vector3::from_row_slice(&semi),
                })
            }
            "torus" => {
                forbid(&[
                    ("radius", s.radius.is_some()),
                    ("semi_axes", s.semi_axes.is_some()),
                    ("spheres", s.spheres.is_some()),
                    ("blend", s.blend.is_some()),
                ])?;
                Ok(AnalyticShape::Torus {
                    center: center(),
                    major_radius: s
                        .major_radius
                        .ok_or_else(|| Error::Config("torus requires major_radius".into()))?,
                    minor_radius: s
                        .minor_radius
                        .ok_or_else(|| Error::Config("torus requires minor_radius".into()))?,
                })
            }
            "smooth_union" => {
                forbid(&[
                    ("radius", s.radius.is_some()),
                    ("semi_axes", s.semi_axes.is_some()),
                    ("major_radius", s.major_radius.is_some()),
                    ("minor_radius", s.minor_radius.is_some()),
                    ("center", s.center.is_some()),
                ])?;
                let spheres = s
                    .spheres
                    .as_ref()
                    .ok_or_else(|| Error::Config("smooth_union requires spheres".into()))?;
                if spheres.is_empty() {
                    return Err(Error::Config("smooth_union needs at least one sphere".into()));
                }
                Ok(AnalyticShape::SmoothUnion {
                    spheres: spheres
                        .iter()
                        .map(|e| (Vector3::from_row_slice(&e.center), e.radius))
                        .collect(),
                    blend: s
                        .blend
                        .ok_or_else(|| Error::Config("smooth_union requires blend".into()))?,
                })
            }
            other => Err(Error::Config(format!("unknown shape kind {other:?}"))),
        }
    }

    pub fn material(&self) -> Result<Dielectric> {
        Dielectric::new(self.scene.material.eta, self.scene.material.rho)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn thermal(&self) -> Result<ThermalState> {
        ThermalState::new(self.scene.thermal.temperature, self.scene.thermal.wavelength)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn render_mode(&self) -> Result<RenderMode> {
        match self.capture.mode.as_str() {
            "lwir_emission" => Ok(RenderMode::LwirEmission),
            "visible_mixture" => Ok(RenderMode::VisibleMixture),
            other => Err(Error::Config(format!(
                "capture.mode must be lwir_emission or visible_mixture, got {other:?}"
            ))),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let visibility = match t.visibility.as_str() {
            "depth" => VisibilityTest::DepthTraced,
            "facing" => VisibilityTest::FrontFacing,
            other => {
                return Err(Error::Config(format!(
                    "train.visibility must be depth or facing, got {other:?}"
                )))
            }
        };
        let cfg = TrainConfig {
            lambda1: t.lambda1,
            lambda2: t.lambda2,
            epochs: t.epochs,
            batch_pixels: t.batch_pixels,
            lr: t.lr,
            silhouette_halving_period: t.silhouette_halving_period,
            alpha: t.alpha,
            seed: t.seed,
            ambiguous: t.ambiguous,
            max_tsc_points: t.max_tsc_points,
            silhouette_rays: t.silhouette_rays,
            eikonal_samples: t.eikonal_samples,
            ray_samples: t.ray_samples,
            tsc_views_per_batch: t.tsc_views_per_batch,
            visibility,
            tau_vis: t.tau_vis,
            ordered_reduction: t.ordered_reduction,
            network: NetworkConfig {
                width: t.width,
                hidden_layers: t.hidden_layers,
                skip_layer: t.skip_layer,
                frequencies: t.frequencies,
                softplus_beta: t.softplus_beta,
                init_radius: t.init_radius,
            },
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Scene bounding box: explicit half-extent or 1.5x the shape bound.
    pub fn scene_bbox(&self) -> Result<crate::scene::Aabb> {
        if let Some(h) = self.scene.bbox_half_extent {
            return Ok(crate::scene::Aabb::centered_cube(h));
        }
        Ok(self.shape()?.bounding_box(1.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[scene.shape]
kind = "sphere"
radius = 1.0

[scene.material]
eta = 1.5

[scene.thermal]
temperature = 310.0
wavelength = 1.0e-5

[capture]
n_views = 4
image_size = [32, 32]
camera_radius = 3.0
focal = 50.0
mode = "lwir_emission"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert!(matches!(cfg.shape().unwrap(), AnalyticShape::Sphere { .. }));
        let t = cfg.train_config().unwrap();
        assert_eq!(t.lambda1, 50.0);
        assert_eq!(t.epochs, 50);
        assert_eq!(cfg.eval.mesh_resolution, 128);
        assert_eq!(cfg.capture.polarizer_angles.len(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\n[train]\nlearning_rate = 0.2\n");
        let err = PipelineConfig::from_toml(&bad).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn wrong_kind_keys_are_rejected() {
        let bad = MINIMAL.replace("radius = 1.0", "radius = 1.0\nblend = 0.3");
        assert!(PipelineConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn mode_is_validated() {
        let bad = MINIMAL.replace("lwir_emission", "thermal");
        assert!(PipelineConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn shape_kinds_parse() {
        let torus = MINIMAL.replace(
            "kind = \"sphere\"\nradius = 1.0",
            "kind = \"torus\"\nmajor_radius = 0.8\nminor_radius = 0.3",
        );
        assert!(matches!(
            PipelineConfig::from_toml(&torus).unwrap().shape().unwrap(),
            AnalyticShape::Torus { .. }
        ));
        let union = MINIMAL.replace(
            "kind = \"sphere\"\nradius = 1.0",
            "kind = \"smooth_union\"\nblend = 0.2\nspheres = [{ center = [0.0, 0.0, 0.0], radius = 0.5 }, { center = [0.4, 0.0, 0.0], radius = 0.4 }]",
        );
        assert!(matches!(
            PipelineConfig::from_toml(&union).unwrap().shape().unwrap(),
            AnalyticShape::SmoothUnion { .. }
        ));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let again = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(again.capture.n_views, 4);
    }
}
