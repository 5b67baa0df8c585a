//! Volumetric comparison of two meshes: voxelize over shared bounds and
//! report the 3D intersection-over-union.
//!
//!     cargo run --release --example voxel_iou

use softsil::mesh::{cuboid, icosphere};
use softsil::voxel::{iou_3d, shared_bounds, voxelize};

fn main() -> softsil::Result<()> {
    let sphere = icosphere(3, 0.5)?;
    let cube = cuboid([0.4, 0.4, 0.4])?;

    let bounds = shared_bounds(&sphere, &cube)?;
    for resolution in [16, 32, 64] {
        let a = voxelize(&sphere, resolution, bounds)?;
        let b = voxelize(&cube, resolution, bounds)?;
        println!(
            "resolution {resolution:>2}: sphere {:>6} cells, cube {:>6} cells, IoU {:.4}",
            a.occupied_count(),
            b.occupied_count(),
            iou_3d(&a, &b)?
        );
    }
    Ok(())
}
