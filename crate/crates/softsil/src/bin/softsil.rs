//! Command-line wrapper around the library: render silhouettes, generate
//! multi-view targets, fit a template mesh, check gradients, and compare
//! meshes volumetrically.
//!
//! Exit codes: 0 success, 1 numerical or validation failure, 2 I/O or
//! argument errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use softsil::error::Error;
use softsil::fit::{evaluate_2d_iou, fit, loss_history_csv, FitConfig};
use softsil::gradcheck::{self, GradCheckConfig};
use softsil::loss::LossWeights;
use softsil::manifest::{load_view_set, write_manifest, ViewRecord};
use softsil::mesh::icosphere;
use softsil::obj::{load_obj, save_obj};
use softsil::pgm::{write_pgm, GrayscaleImage};
use softsil::raster::{render_hard, render_soft, Sharpness};
use softsil::voxel::mesh_iou_3d;
use softsil::Camera;

#[derive(Parser)]
#[command(name = "softsil", version, about = "Differentiable silhouette rasterizer and mesh fitter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewSetKind {
    /// 24 azimuths at 30 degrees elevation.
    Ring24,
    /// 24 azimuths at each of 5 elevations (-30..30 degrees).
    Grid120,
}

#[derive(Subcommand)]
enum Command {
    /// Render one silhouette of a mesh to a PGM file.
    Render {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        azimuth: f64,
        #[arg(long, default_value_t = 0.0)]
        elevation: f64,
        #[arg(long, default_value_t = 2.732)]
        distance: f64,
        #[arg(long, default_value_t = 30.0)]
        fov: f64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 3e-5)]
        sigma: f64,
        /// Write the binary mask of a standard rasterizer instead.
        #[arg(long)]
        hard: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a hard-silhouette view set plus its manifest CSV.
    Genviews {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, value_enum)]
        viewset: ViewSetKind,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 2.732)]
        distance: f64,
        #[arg(long, default_value_t = 30.0)]
        fov: f64,
        #[arg(long)]
        outdir: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Fit a template mesh to the silhouettes listed in a manifest.
    Fit {
        /// Either the literal `sphere642` or a path to a template OBJ.
        #[arg(long)]
        template: String,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 3e-5)]
        sigma: f64,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value_t = 0.001)]
        mu: f64,
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
        #[arg(long, default_value_t = 30.0)]
        fov: f64,
        #[arg(long)]
        out: PathBuf,
        /// Loss history CSV path.
        #[arg(long)]
        log: PathBuf,
    },
    /// Compare analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Volumetric IoU between two closed meshes.
    Eval3d {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
    },
}

/// Radius of the built-in 642-vertex template sphere.
const TEMPLATE_RADIUS: f64 = 0.4;

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 for I/O and file-format problems, 1 for numerical or validation
/// failures.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. }
        | Error::ObjParse { .. }
        | Error::ManifestParse { .. }
        | Error::PgmFormat { .. } => 2,
        Error::FitView { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Render {
            mesh,
            azimuth,
            elevation,
            distance,
            fov,
            size,
            sigma,
            hard,
            out,
        } => {
            let mesh = load_obj(&mesh)?;
            let camera = Camera {
                azimuth_deg: azimuth,
                elevation_deg: elevation,
                distance,
                fov_y_deg: fov,
                width: size,
                height: size,
            };
            let image = if hard {
                GrayscaleImage::from_mask(&render_hard(&mesh, &camera)?)
            } else {
                GrayscaleImage::from_soft(&render_soft(&mesh, &camera, Sharpness::new(sigma)?)?)
            };
            write_pgm(&image, &out)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Genviews {
            mesh,
            viewset,
            size,
            distance,
            fov,
            outdir,
            manifest,
        } => {
            let mesh = load_obj(&mesh)?;
            let cameras = match viewset {
                ViewSetKind::Ring24 => softsil::camera::ring24(distance, fov, size),
                ViewSetKind::Grid120 => softsil::camera::grid120(distance, fov, size),
            };
            std::fs::create_dir_all(&outdir).map_err(|e| Error::io(&outdir, e))?;
            let mut records = Vec::with_capacity(cameras.len());
            for (i, camera) in cameras.iter().enumerate() {
                let mask = render_hard(&mesh, camera)?;
                let image_path = outdir.join(format!("view_{i:03}.pgm"));
                write_pgm(&GrayscaleImage::from_mask(&mask), &image_path)?;
                records.push(ViewRecord {
                    azimuth_deg: camera.azimuth_deg,
                    elevation_deg: camera.elevation_deg,
                    distance: camera.distance,
                    image_path: manifest_relative(&manifest, &image_path),
                });
            }
            write_manifest(&records, &manifest)?;
            println!("wrote {} views to {}", records.len(), outdir.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Fit {
            template,
            manifest,
            iters,
            sigma,
            lambda,
            mu,
            alpha,
            fov,
            out,
            log,
        } => {
            let template = if template == "sphere642" {
                icosphere(3, TEMPLATE_RADIUS)?
            } else {
                load_obj(Path::new(&template))?
            };
            let views = load_view_set(&manifest, fov)?;
            let config = FitConfig {
                sigma: Sharpness::new(sigma)?,
                weights: LossWeights { lambda, mu },
                adam_alpha: alpha,
                iterations: iters,
                ..FitConfig::default()
            };
            let (fitted, history) = fit(&template, &views, &config)?;
            save_obj(&fitted, &out)?;
            std::fs::write(&log, loss_history_csv(&history)).map_err(|e| Error::io(&log, e))?;
            if let Some(last) = history.last() {
                println!(
                    "final loss: iou={:.6} laplacian={:.6} flattening={:.6} total={:.6}",
                    last.iou, last.laplacian, last.flattening, last.total
                );
            }
            let (_, mean_iou) = evaluate_2d_iou(&fitted, &views)?;
            println!("mean 2D IoU: {mean_iou:.4}");
            Ok(ExitCode::SUCCESS)
        }

        Command::Gradcheck { trials, seed } => {
            let report = gradcheck::run(&GradCheckConfig {
                trials,
                seed,
                ..GradCheckConfig::default()
            })?;
            println!("{report} (threshold 1e-4, seed {seed})");
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::Eval3d {
            mesh,
            reference,
            resolution,
        } => {
            let a = load_obj(&mesh)?;
            let b = load_obj(&reference)?;
            let iou = mesh_iou_3d(&a, &b, resolution)?;
            println!("3D IoU: {iou:.6}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Image path as stored in the manifest: relative to the manifest's parent
/// directory when possible, absolute otherwise.
fn manifest_relative(manifest: &Path, image: &Path) -> String {
    let parent = manifest.parent().filter(|p| !p.as_os_str().is_empty());
    let relative = parent
        .map(|p| image.strip_prefix(p))
        .unwrap_or(Ok(image))
        .ok();
    match relative {
        Some(rel) => rel.display().to_string(),
        None => std::fs::canonicalize(image)
            .unwrap_or_else(|_| image.to_path_buf())
            .display()
            .to_string(),
    }
}
