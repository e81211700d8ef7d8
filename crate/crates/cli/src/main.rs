use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thermopol::io::PipelineConfig;
use thermopol::pipeline;
use thermopol::Error;

/// Thermal-polarimetric rendering and multi-view shape reconstruction.
#[derive(Parser)]
#[command(name = "thermopol", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic polarimetric dataset from a scene config.
    Render {
        /// Pipeline configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the implicit surface to a rendered dataset.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory produced by `render`.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for checkpoint.bin and loss.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the zero level set of a checkpoint as a mesh.
    ExtractMesh {
        #[arg(long)]
        ckpt: PathBuf,
        /// Marching-cubes grid resolution (>= 16).
        #[arg(long)]
        res: usize,
        /// Output mesh path (.obj or .ply).
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an extracted mesh (and optionally a checkpoint's normals)
    /// against ground truth.
    Evaluate {
        /// Estimated mesh (.obj or .ply).
        #[arg(long)]
        mesh: PathBuf,
        /// Ground truth: a mesh file or a shape spec like "sphere:1.0".
        #[arg(long)]
        gt: String,
        /// Checkpoint for the normal-map comparison.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Dataset directory holding ground-truth normal maps.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output metrics JSON.
        #[arg(long)]
        out: PathBuf,
        /// Points sampled on each surface.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

fn run(cli: Cli) -> thermopol::Result<()> {
    match cli.command {
        Command::Render { config, out } => {
            let cfg = PipelineConfig::from_path(&config)?;
            let summary = pipeline::cmd_render(&cfg, &out)?;
            println!(
                "rendered {} views ({} files) into {}",
                summary.views,
                summary.files_written,
                summary.out_dir.display()
            );
        }
        Command::Reconstruct { config, data, out } => {
            let cfg = PipelineConfig::from_path(&config)?;
            let summary = pipeline::cmd_reconstruct(&cfg, &data, &out)?;
            println!(
                "trained {} epochs, final loss {:.6}; checkpoint {}",
                summary.epochs,
                summary.final_total_loss,
                summary.checkpoint.display()
            );
        }
        Command::ExtractMesh { ckpt, res, out } => {
            let (vertices, faces) = pipeline::cmd_extract_mesh(&ckpt, res, &out)?;
            println!("extracted {vertices} vertices, {faces} faces into {}", out.display());
        }
        Command::Evaluate {
            mesh,
            gt,
            ckpt,
            data,
            out,
            samples,
        } => {
            let args = pipeline::EvaluateArgs {
                mesh: &mesh,
                gt: &gt,
                ckpt: ckpt.as_deref(),
                data: data.as_deref(),
                cloud_samples: samples,
                ..Default::default()
            };
            let report = pipeline::cmd_evaluate(&args)?;
            thermopol::io::write_metrics(&out, &report)?;
            println!(
                "chamfer {:.6}, normal mae {} deg, icp {} iters (rmse {:.3e})",
                report.chamfer,
                report
                    .normal_mae_deg
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "n/a".into()),
                report.icp_iterations,
                report.icp_rmse
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Parse(_) => ExitCode::from(2),
                Error::Numerical(_) | Error::NoConvergence(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
