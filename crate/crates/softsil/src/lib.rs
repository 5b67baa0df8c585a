//! Differentiable silhouette rasterization and multi-view shape fitting.
//!
//! The crate renders a triangle mesh into a soft, real-valued silhouette in
//! which every face contributes a coverage probability to every pixel. The
//! formulation is continuous in the vertex positions, so an analytic
//! backward pass can push image-space losses down to the mesh, and a
//! template sphere can be deformed by plain gradient descent until its
//! silhouettes match a set of target masks.
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//!
//! - `render_silhouette`: soft vs. hard rasterization of the template sphere
//! - `sigma_sweep`: how the soft silhouette approaches the hard one
//! - `gradient_check`: analytic gradients vs. finite differences
//! - `generate_views`: multi-view target masks plus a view manifest
//! - `fit_ellipsoid`: end-to-end shape fitting against rendered views
//! - `color_fit`: recovering per-vertex colors through the compositor
//! - `voxel_iou`: volumetric intersection-over-union between two meshes
//!
//! The `softsil` binary wraps the same capabilities as subcommands
//! (`render`, `genviews`, `fit`, `gradcheck`, `eval3d`).

// Config validation uses `!(x > 0.0)` on purpose: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod fit;
pub mod geom;
pub mod gradcheck;
pub mod loss;
pub mod manifest;
pub mod mesh;
pub mod obj;
pub mod pgm;
pub mod raster;
pub mod vec3;
pub mod voxel;

pub use camera::{pixel_center, project, Camera, ProjectedMesh};
pub use error::{Error, Result};
pub use fit::{adam_step, evaluate_2d_iou, fit, AdamState, FitConfig, ViewSet};
pub use loss::{
    color_l2_loss, flattening_loss, iou_loss, laplacian_loss, total_loss, LossReport, LossWeights,
};
pub use mesh::{edge_adjacency, icosphere, vertex_adjacency, EdgeAdjacency, Mesh, VertexAdjacency};
pub use obj::{load_obj, save_obj};
pub use raster::{
    backward_color, backward_soft, render_color, render_hard, render_soft, BinaryMask, ColorImage,
    GradientBuffer, Sharpness, SoftSilhouette,
};
pub use voxel::{iou_3d, voxelize, VoxelGrid};
