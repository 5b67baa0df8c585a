//! Renders the template sphere once with the soft rasterizer and once with
//! the reference hard rasterizer, writing both as PGM files.
//!
//!     cargo run --release --example render_silhouette

use softsil::mesh::icosphere;
use softsil::pgm::{write_pgm, GrayscaleImage};
use softsil::raster::{render_hard, render_soft, Sharpness};
use softsil::Camera;

fn main() -> softsil::Result<()> {
    let mesh = icosphere(3, 0.4)?;
    let camera = Camera {
        elevation_deg: 20.0,
        ..Camera::default()
    };

    let soft = render_soft(&mesh, &camera, Sharpness::default())?;
    let hard = render_hard(&mesh, &camera)?;

    std::fs::create_dir_all("target/examples")
        .map_err(|e| softsil::Error::io("target/examples", e))?;
    write_pgm(&GrayscaleImage::from_soft(&soft), "target/examples/sphere_soft.pgm")?;
    write_pgm(&GrayscaleImage::from_mask(&hard), "target/examples/sphere_hard.pgm")?;

    let solid = hard.count_true();
    let mean: f64 = soft.values().iter().sum::<f64>() / soft.values().len() as f64;
    println!("hard silhouette: {solid} solid pixels of {}", 64 * 64);
    println!("soft silhouette: mean value {mean:.4}");
    println!("wrote target/examples/sphere_soft.pgm and sphere_hard.pgm");
    Ok(())
}
