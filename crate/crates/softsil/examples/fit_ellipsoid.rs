//! End-to-end shape fitting demo: deforms the template sphere against
//! silhouettes of an ellipsoid rendered from a ring of cameras.
//!
//! This is a shortened run so it finishes in well under a minute; the
//! acceptance suite runs the full 2000-iteration version.
//!
//!     cargo run --release --example fit_ellipsoid

use softsil::camera::ring24;
use softsil::fit::{evaluate_2d_iou, fit, FitConfig, ViewSet};
use softsil::mesh::icosphere;
use softsil::obj::save_obj;
use softsil::raster::render_hard;
use softsil::voxel::mesh_iou_3d;

fn main() -> softsil::Result<()> {
    let sphere = icosphere(3, 1.0)?;
    let ellipsoid = sphere.with_vertices(
        sphere
            .vertices()
            .iter()
            .map(|v| [v[0] * 0.5, v[1] * 0.35, v[2] * 0.25])
            .collect(),
    )?;

    let cameras = ring24(2.732, 30.0, 64);
    let views = ViewSet::new(
        cameras
            .iter()
            .map(|c| render_hard(&ellipsoid, c).map(|mask| (*c, mask)))
            .collect::<softsil::Result<Vec<_>>>()?,
    )?;

    let template = icosphere(3, 0.4)?;
    let config = FitConfig {
        iterations: 400,
        ..FitConfig::default()
    };

    println!("fitting {} vertices against {} views...", template.vertex_count(), views.len());
    let (fitted, history) = fit(&template, &views, &config)?;

    for (i, report) in history.iter().enumerate() {
        if i % 50 == 0 || i + 1 == history.len() {
            println!(
                "iter {i:>4}: iou={:.5} laplacian={:.5} flattening={:.5} total={:.5}",
                report.iou, report.laplacian, report.flattening, report.total
            );
        }
    }

    let (_, mean_iou) = evaluate_2d_iou(&fitted, &views)?;
    println!("mean 2D IoU after {} iterations: {mean_iou:.4}", config.iterations);
    println!("3D IoU vs target: {:.4}", mesh_iou_3d(&fitted, &ellipsoid, 32)?);

    std::fs::create_dir_all("target/examples")
        .map_err(|e| softsil::Error::io("target/examples", e))?;
    save_obj(&fitted, "target/examples/fitted_ellipsoid.obj")?;
    println!("wrote target/examples/fitted_ellipsoid.obj");
    Ok(())
}
