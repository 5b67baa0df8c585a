//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed OBJ line: {message}")]
    ObjParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: malformed manifest row: {message}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: bad PGM file: {message}")]
    PgmFormat { path: PathBuf, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("icosphere subdivision level {requested} exceeds the maximum of {max}")]
    SubdivisionTooDeep { requested: u32, max: u32 },

    #[error("vertex {vertex} lies behind the near plane (cam_z = {cam_z})")]
    VertexBehindCamera { vertex: usize, cam_z: f64 },

    #[error("non-manifold edge ({v0}, {v1}): {count} incident faces")]
    NonManifoldEdge { v0: usize, v1: usize, count: usize },

    #[error("mesh is not closed: {boundary_edges} boundary edge(s)")]
    OpenMesh { boundary_edges: usize },

    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(usize),

    #[error("face {0} is degenerate (area below threshold)")]
    DegenerateFace(usize),

    #[error("mesh has no per-vertex colors")]
    MissingColors,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("voxel grids differ in resolution or bounds")]
    GridMismatch,

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fit failed at iteration {iteration} (view {view}): {source}")]
    FitView {
        iteration: usize,
        view: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
