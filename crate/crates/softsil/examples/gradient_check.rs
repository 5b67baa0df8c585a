//! Compares the analytic backward pass against central finite differences
//! on randomized triangle/pixel/sharpness configurations.
//!
//!     cargo run --release --example gradient_check

use softsil::gradcheck::{run, GradCheckConfig};

fn main() -> softsil::Result<()> {
    let config = GradCheckConfig::default();
    let report = run(&config)?;
    println!("{report} (threshold {:.0e}, seed {})", config.threshold, config.seed);
    Ok(())
}
