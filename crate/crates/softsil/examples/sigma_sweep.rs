//! Shows the soft silhouette converging to the hard one as the sharpness
//! parameter shrinks.
//!
//!     cargo run --release --example sigma_sweep

use softsil::mesh::icosphere;
use softsil::raster::{render_hard, render_soft, Sharpness};
use softsil::Camera;

fn main() -> softsil::Result<()> {
    let mesh = icosphere(2, 0.5)?;
    let camera = Camera::default();
    let hard = render_hard(&mesh, &camera)?;

    println!("{:>10}  {:>14}", "sigma", "mean |soft-hard|");
    for sigma in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let soft = render_soft(&mesh, &camera, Sharpness::new(sigma)?)?;
        let mean: f64 = soft
            .values()
            .iter()
            .zip(hard.values())
            .map(|(&v, &h)| (v - if h { 1.0 } else { 0.0 }).abs())
            .sum::<f64>()
            / soft.values().len() as f64;
        println!("{sigma:>10.0e}  {mean:>14.6}");
    }
    Ok(())
}
