//! The four pipeline commands: render a synthetic dataset, reconstruct the
//! shape from it, extract a mesh from a checkpoint, and evaluate against
//! ground truth. The CLI binary is a thin wrapper over these.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image::{ImageKind, Mask, PolarimetricImage};
use crate::io;
use crate::metrics::{chamfer, icp_align, normal_mae, PointCloud};
use crate::recon::{train, MultiViewAolpDataset, ViewObservation};
use crate::scene::{turntable_poses, Aabb, AnalyticShape, CameraView};
use crate::sdf::{marching_cubes, sphere_trace_batch, SdfField, SdfNetwork, TriangleMesh};
use crate::sim::{
    add_noise, aolp_image, dolp_image, estimate_stokes, polarizer_images, render_stokes,
    RenderJob, RenderedView,
};

fn view_file(dir: &Path, index: usize, channel: &str, ext: &str) -> PathBuf {
    dir.join(format!("view_{index:03}_{channel}.{ext}"))
}

/// Summary of a rendered dataset.
#[derive(Debug, Clone)]
pub struct RenderSummary {
    pub views: usize,
    pub files_written: usize,
    pub out_dir: PathBuf,
}

/// Render the configured scene into a dataset directory: per-view Stokes,
/// AoLP/DoLP, intensity images and masks, plus cameras.json and the
/// ground-truth mesh. Deterministic for a fixed config.
pub fn cmd_render(config: &io::PipelineConfig, out_dir: &Path) -> Result<RenderSummary> {
    std::fs::create_dir_all(out_dir)?;
    let shape = config.shape()?;
    let material = config.material()?;
    let thermal = config.thermal()?;
    let mode = config.render_mode()?;
    let bbox = config.scene_bbox()?;
    let cap = &config.capture;

    if cap.noise_sigma > 0.0 && !canonical_angles(&cap.polarizer_angles) {
        return Err(Error::Config(
            "noisy capture requires polarizer_angles [0, pi/4, pi/2, 3pi/4] \
             for the Stokes estimator"
                .into(),
        ));
    }

    let mut job = RenderJob::new(shape.clone(), material, thermal, mode);
    job.noise_sigma = cap.noise_sigma;
    job.polarizer_angles = cap.polarizer_angles.clone();
    job.ambient_radiance = cap.ambient_radiance;
    job.env_radiance = cap.env_radiance;
    job.seed = cap.seed;

    let views = turntable_poses(
        cap.n_views,
        cap.camera_radius,
        cap.elevation,
        Vector3::zeros(),
        cap.focal,
        cap.focal,
        cap.image_size[0],
        cap.image_size[1],
    )?;
    io::write_cameras(&out_dir.join("cameras.json"), &views, &bbox)?;

    let mut files = 1usize;
    for (vi, view) in views.iter().enumerate() {
        let rendered = render_stokes(&job, view)?;
        files += write_view(out_dir, vi, &job, &rendered)?;
    }

    // Ground-truth mesh for evaluation.
    let gt_mesh = marching_cubes(&shape, config.eval.mesh_resolution, &bbox)?;
    io::write_obj(&out_dir.join("gt_mesh.obj"), &gt_mesh)?;
    files += 1;

    Ok(RenderSummary {
        views: views.len(),
        files_written: files,
        out_dir: out_dir.to_path_buf(),
    })
}

fn canonical_angles(angles: &[f64]) -> bool {
    let expected = [
        0.0,
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::FRAC_PI_2,
        3.0 * std::f64::consts::FRAC_PI_4,
    ];
    angles.len() == 4
        && angles
            .iter()
            .zip(expected.iter())
            .all(|(a, e)| (a - e).abs() < 1e-9)
}

fn write_view(dir: &Path, vi: usize, job: &RenderJob, rendered: &RenderedView) -> Result<usize> {
    let mut files = 0usize;

    // Observed AoLP/DoLP: noise-free straight from the Stokes image, noisy
    // through the polarizer/estimator chain.
    let (aolp_obs, dolp_obs, intensities) = if job.polarizer_angles.is_empty() {
        (rendered.aolp(), rendered.dolp(), vec![])
    } else {
        let mut imgs = polarizer_images(&rendered.stokes, &job.polarizer_angles)?;
        if job.noise_sigma > 0.0 {
            add_noise(
                &mut imgs,
                job.noise_sigma,
                job.seed
                    .wrapping_add(vi as u64)
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            let est = estimate_stokes(&imgs[0], &imgs[1], &imgs[2], &imgs[3])?;
            (aolp_image(&est), dolp_image(&est), imgs)
        } else {
            (rendered.aolp(), rendered.dolp(), imgs)
        }
    };

    io::write_pfm(&view_file(dir, vi, "stokes", "pfm"), &rendered.stokes)?;
    io::write_pfm(&view_file(dir, vi, "aolp", "pfm"), &aolp_obs)?;
    io::write_pfm(&view_file(dir, vi, "aolp_gt", "pfm"), &rendered.gt_aolp)?;
    io::write_pfm(&view_file(dir, vi, "dolp", "pfm"), &dolp_obs)?;
    io::write_pfm(&view_file(dir, vi, "normal", "pfm"), &rendered.gt_normal)?;
    io::write_pfm(&view_file(dir, vi, "depth", "pfm"), &rendered.gt_depth)?;
    io::write_pgm(&view_file(dir, vi, "mask", "pgm"), &rendered.mask)?;
    files += 7;
    for (k, img) in intensities.iter().enumerate() {
        io::write_pfm(&view_file(dir, vi, &format!("intensity_{k}"), "pfm"), img)?;
        files += 1;
    }
    Ok(files)
}

/// Load a rendered dataset (cameras, AoLP images, masks).
pub fn load_dataset(data_dir: &Path) -> Result<MultiViewAolpDataset> {
    let (cameras, bbox) = io::read_cameras(&data_dir.join("cameras.json"))?;
    let mut views = Vec::with_capacity(cameras.len());
    for (vi, camera) in cameras.into_iter().enumerate() {
        let mut aolp = io::read_pfm(&view_file(data_dir, vi, "aolp", "pfm"), ImageKind::Aolp)?;
        let mask = io::read_pgm(&view_file(data_dir, vi, "mask", "pgm"))?;
        // Noisy AoLP estimates are defined wherever intensities are; the
        // dataset invariant wants NaN outside the silhouette.
        for row in 0..mask.height {
            for col in 0..mask.width {
                if !mask.get(col, row) {
                    aolp.set(col, row, 0, f64::NAN);
                    aolp.mask.set(col, row, false);
                }
            }
        }
        views.push(ViewObservation { camera, aolp, mask });
    }
    MultiViewAolpDataset::new(views, bbox)
}

/// Summary of a reconstruction run.
#[derive(Debug, Clone)]
pub struct ReconstructSummary {
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub epochs: usize,
    pub final_total_loss: f64,
}

/// Train the SDF on a rendered dataset; writes `checkpoint.bin` and
/// `loss.csv` into `out_dir`.
pub fn cmd_reconstruct(
    config: &io::PipelineConfig,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<ReconstructSummary> {
    std::fs::create_dir_all(out_dir)?;
    let dataset = load_dataset(data_dir)?;
    let train_cfg = config.train_config()?;
    let (net, history) = train(&dataset, &train_cfg)?;
    let ckpt = out_dir.join("checkpoint.bin");
    io::write_checkpoint(&ckpt, &net, &dataset.bbox, None)?;
    let csv = out_dir.join("loss.csv");
    io::write_loss_csv(&csv, &history)?;
    Ok(ReconstructSummary {
        checkpoint: ckpt,
        loss_csv: csv,
        epochs: history.len(),
        final_total_loss: history.last().map(|s| s.total).unwrap_or(f64::NAN),
    })
}

/// Extract the zero level set of a checkpointed network as a mesh file
/// (OBJ or PLY by extension). Returns (vertices, faces).
pub fn cmd_extract_mesh(
    ckpt_path: &Path,
    resolution: usize,
    out_path: &Path,
) -> Result<(usize, usize)> {
    let ckpt = io::read_checkpoint(ckpt_path)?;
    let mesh = marching_cubes(&ckpt.net, resolution, &ckpt.bbox)?;
    io::write_mesh(out_path, &mesh)?;
    Ok((mesh.vertices.len(), mesh.faces.len()))
}

pub enum GtSource {
    Mesh(PathBuf),
    Shape(AnalyticShape),
}

/// Ground truth for evaluation: a mesh file or an analytic shape spec like
/// `sphere:1.0`, `torus:0.8,0.3` or `ellipsoid:1.0,0.7,0.5`.
pub fn parse_gt_spec(spec: &str) -> Result<GtSource> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(GtSource::Mesh(path.to_path_buf()));
    }
    let Some((kind, params)) = spec.split_once(':') else {
        return Err(Error::Config(format!(
            "ground truth {spec:?} is neither an existing file nor a shape spec"
        )));
    };
    let nums: Vec<f64> = params
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number in shape spec {spec:?}")))
        })
        .collect::<Result<_>>()?;
    let shape = match (kind, nums.as_slice()) {
        ("sphere", [r]) => AnalyticShape::sphere(Vector3::zeros(), *r),
        ("torus", [major, minor]) => AnalyticShape::Torus {
            center: Vector3::zeros(),
            major_radius: *major,
            minor_radius: *minor,
        },
        ("ellipsoid", [a, b, c]) => AnalyticShape::Ellipsoid {
            center: Vector3::zeros(),
            semi_axes: Vector3::new(*a, *b, *c),
        },
        _ => {
            return Err(Error::Config(format!(
                "unsupported shape spec {spec:?} (use sphere:R, torus:R,r or ellipsoid:a,b,c)"
            )))
        }
    };
    Ok(GtSource::Shape(shape))
}

/// Inputs for the evaluate command.
pub struct EvaluateArgs<'a> {
    pub mesh: &'a Path,
    pub gt: &'a str,
    /// Checkpoint + dataset directory enable the normal-map comparison.
    pub ckpt: Option<&'a Path>,
    pub data: Option<&'a Path>,
    pub cloud_samples: usize,
    pub icp_max_iters: usize,
    pub icp_tol: f64,
    pub seed: u64,
    /// Grid resolution when the ground truth is an analytic shape.
    pub mesh_resolution: usize,
}

impl<'a> Default for EvaluateArgs<'a> {
    fn default() -> Self {
        Self {
            mesh: Path::new(""),
            gt: "",
            ckpt: None,
            data: None,
            cloud_samples: 100_000,
            icp_max_iters: 60,
            icp_tol: 1e-12,
            seed: 2,
            mesh_resolution: 128,
        }
    }
}

fn fibonacci_points(n: usize, radius: f64, center: Vector3<f64>) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let t = golden * i as f64;
            center + Vector3::new(r * t.cos(), y, r * t.sin()) * radius
        })
        .collect()
}

fn gt_cloud(args: &EvaluateArgs) -> Result<PointCloud> {
    match parse_gt_spec(args.gt)? {
        GtSource::Mesh(path) => {
            let mesh = io::read_mesh(&path)?;
            PointCloud::from_mesh(&mesh, args.cloud_samples, args.seed.wrapping_add(1))
        }
        GtSource::Shape(shape) => match &shape {
            AnalyticShape::Sphere { center, radius } => {
                PointCloud::new(fibonacci_points(args.cloud_samples, *radius, *center))
            }
            other => {
                let mesh = marching_cubes(other, args.mesh_resolution, &other.bounding_box(1.5))?;
                PointCloud::from_mesh(&mesh, args.cloud_samples, args.seed.wrapping_add(1))
            }
        },
    }
}

/// ICP-align the estimated mesh to the ground truth, then report Chamfer
/// distance (and normal MAE when a checkpoint and dataset are supplied).
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<io::MetricsReport> {
    let est_mesh = io::read_mesh(args.mesh)?;
    if est_mesh.faces.is_empty() {
        return Err(Error::EmptyLevelSet);
    }
    let est_cloud = PointCloud::from_mesh(&est_mesh, args.cloud_samples, args.seed)?;
    let gt = gt_cloud(args)?;

    let icp = icp_align(&est_cloud, &gt, args.icp_max_iters, args.icp_tol)?;
    let aligned = est_cloud.transformed(&icp.transform);
    let chamfer_dist = chamfer(&aligned, &gt)?;

    let normal_mae_deg = match (args.ckpt, args.data) {
        (Some(ckpt_path), Some(data_dir)) => {
            Some(normal_error_from_checkpoint(ckpt_path, data_dir)?)
        }
        _ => None,
    };

    Ok(io::MetricsReport {
        chamfer: chamfer_dist,
        normal_mae_deg,
        icp_iterations: icp.iterations,
        icp_rmse: icp.rmse,
    })
}

/// Render normal maps by sphere-tracing the checkpointed SDF through every
/// dataset view and compare with the stored ground-truth normals.
pub fn normal_error_from_checkpoint(ckpt_path: &Path, data_dir: &Path) -> Result<f64> {
    let ckpt = io::read_checkpoint(ckpt_path)?;
    let (cameras, bbox) = io::read_cameras(&data_dir.join("cameras.json"))?;
    let (w, h) = (cameras[0].width, cameras[0].height);

    // Stack all views side by side so one comparison covers the dataset.
    let n = cameras.len();
    let mut est = PolarimetricImage::new_masked(ImageKind::Normal3, w * n, h);
    let mut gt = PolarimetricImage::new_masked(ImageKind::Normal3, w * n, h);
    let mut mask = Mask::new(w * n, h, false);
    est.mask = Mask::new(w * n, h, true);
    gt.mask = Mask::new(w * n, h, true);

    for (vi, camera) in cameras.iter().enumerate() {
        let gt_normals =
            io::read_pfm(&view_file(data_dir, vi, "normal", "pfm"), ImageKind::Normal3)?;
        let view_mask = io::read_pgm(&view_file(data_dir, vi, "mask", "pgm"))?;
        let est_normals = trace_normal_map(&ckpt.net, camera, &bbox, &view_mask)?;
        for row in 0..h {
            for col in 0..w {
                if !view_mask.get(col, row) {
                    continue;
                }
                let e = est_normals.pixel(col, row);
                let g = gt_normals.pixel(col, row);
                if e.iter().chain(g.iter()).any(|v| !v.is_finite()) {
                    continue;
                }
                let gcol = vi * w + col;
                for c in 0..3 {
                    est.set(gcol, row, c, e[c]);
                    gt.set(gcol, row, c, g[c]);
                }
                mask.set(gcol, row, true);
            }
        }
    }
    normal_mae(&est, &gt, &mask)
}

/// Sphere-trace the field through all masked pixels of a view; normals are
/// the normalized field gradient at the hits, oriented toward the camera.
pub fn trace_normal_map(
    field: &SdfNetwork<f32>,
    camera: &CameraView,
    bbox: &Aabb,
    mask: &Mask,
) -> Result<PolarimetricImage> {
    let (w, h) = (camera.width, camera.height);
    let mut rays = Vec::new();
    let mut ray_pixels = Vec::new();
    for row in 0..h {
        for col in 0..w {
            if !mask.get(col, row) {
                continue;
            }
            rays.push(camera.pixel_center_ray(col, row)?);
            ray_pixels.push((col, row));
        }
    }
    let hits = sphere_trace_batch(field, &rays, bbox);
    let mut out = PolarimetricImage::new_masked(ImageKind::Normal3, w, h);
    let mut pts = Vec::new();
    let mut pt_pixels = Vec::new();
    for ((hit, &(col, row)), ray) in hits.iter().zip(ray_pixels.iter()).zip(rays.iter()) {
        if let Some(hit) = hit {
            pts.push((hit.point, *ray));
            pt_pixels.push((col, row));
        }
    }
    if pts.is_empty() {
        return Ok(out);
    }
    let mut arr = Array2::zeros((pts.len(), 3));
    for (i, (p, _)) in pts.iter().enumerate() {
        arr[(i, 0)] = p.x;
        arr[(i, 1)] = p.y;
        arr[(i, 2)] = p.z;
    }
    let grads = field.gradients(&arr);
    for (i, &(col, row)) in pt_pixels.iter().enumerate() {
        let mut g = Vector3::new(grads[(i, 0)], grads[(i, 1)], grads[(i, 2)]);
        let norm = g.norm();
        if norm < 1e-12 {
            continue;
        }
        g /= norm;
        if g.dot(&pts[i].1.direction) > 0.0 {
            g = -g;
        }
        out.mask.set(col, row, true);
        out.set(col, row, 0, g.x);
        out.set(col, row, 1, g.y);
        out.set(col, row, 2, g.z);
    }
    Ok(out)
}

/// Mesh the checkpointed field directly (shared by tests and the CLI).
pub fn mesh_from_checkpoint(ckpt_path: &Path, resolution: usize) -> Result<TriangleMesh> {
    let ckpt = io::read_checkpoint(ckpt_path)?;
    marching_cubes(&ckpt.net, resolution, &ckpt.bbox)
}
