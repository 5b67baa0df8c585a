//! Renders a 24-view silhouette set of an ellipsoid plus the manifest CSV
//! that the fitting pipeline consumes.
//!
//!     cargo run --release --example generate_views

use softsil::camera::ring24;
use softsil::manifest::{write_manifest, ViewRecord};
use softsil::mesh::icosphere;
use softsil::pgm::{write_pgm, GrayscaleImage};
use softsil::raster::render_hard;

fn main() -> softsil::Result<()> {
    // Ellipsoid with semi-axes 0.5 x 0.35 x 0.25.
    let sphere = icosphere(3, 1.0)?;
    let ellipsoid = sphere.with_vertices(
        sphere
            .vertices()
            .iter()
            .map(|v| [v[0] * 0.5, v[1] * 0.35, v[2] * 0.25])
            .collect(),
    )?;

    let outdir = std::path::Path::new("target/examples/views");
    std::fs::create_dir_all(outdir).map_err(|e| softsil::Error::io(outdir, e))?;

    let mut records = Vec::new();
    for (i, camera) in ring24(2.732, 30.0, 64).iter().enumerate() {
        let mask = render_hard(&ellipsoid, camera)?;
        let name = format!("view_{i:03}.pgm");
        write_pgm(&GrayscaleImage::from_mask(&mask), outdir.join(&name))?;
        records.push(ViewRecord {
            azimuth_deg: camera.azimuth_deg,
            elevation_deg: camera.elevation_deg,
            distance: camera.distance,
            image_path: name,
        });
    }
    write_manifest(&records, outdir.join("views.csv"))?;
    println!("wrote {} masks and views.csv under {}", records.len(), outdir.display());
    Ok(())
}
