//! Triangle-mesh data model, template sphere generation, and adjacency
//! structures.
//!
//! A [`Mesh`] is immutable after construction: operations that deform it
//! build a new one. Faces use counterclockwise winding when viewed from the
//! outside; the icosphere generator produces consistently outward-wound
//! faces, which the dihedral-angle loss relies on.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Highest icosphere subdivision level accepted (642k vertices at 6).
pub const MAX_SUBDIVISIONS: u32 = 6;

/// Triangle mesh: vertex positions, face index triples, optional per-vertex
/// RGB colors in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    colors: Option<Vec<Vec3>>,
}

impl Mesh {
    /// Builds a mesh, validating face indices.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            faces,
            colors: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Builds a mesh with per-vertex colors.
    pub fn with_colors(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        colors: Vec<Vec3>,
    ) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            faces,
            colors: Some(colors),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if f[0] >= n || f[1] >= n || f[2] >= n {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references a vertex index >= vertex count {n}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references the same vertex twice"
                )));
            }
        }
        if let Some(colors) = &self.colors {
            if colors.len() != n {
                return Err(Error::InvalidMesh(format!(
                    "color count {} does not match vertex count {n}",
                    colors.len()
                )));
            }
            for (ci, c) in colors.iter().enumerate() {
                if c.iter().any(|ch| !(0.0..=1.0).contains(ch)) {
                    return Err(Error::InvalidMesh(format!(
                        "color {ci} has a channel outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn colors(&self) -> Option<&[Vec3]> {
        self.colors.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// New mesh with the same topology and colors but different positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} vertices", self.vertices.len()),
                got: format!("{} vertices", vertices.len()),
            });
        }
        let mesh = Mesh {
            vertices,
            faces: self.faces.clone(),
            colors: self.colors.clone(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Replaces the color attribute (values are clamped to [0, 1] by callers).
    pub fn with_color_attribute(&self, colors: Vec<Vec3>) -> Result<Self> {
        let mesh = Mesh {
            vertices: self.vertices.clone(),
            faces: self.faces.clone(),
            colors: Some(colors),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        let mut min = first;
        let mut max = first;
        for v in it {
            for k in 0..3 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
        Some((min, max))
    }
}

/// For each vertex, the sorted list of vertices sharing a face edge with it.
#[derive(Debug, Clone)]
pub struct VertexAdjacency {
    neighbors: Vec<Vec<usize>>,
}

impl VertexAdjacency {
    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        &self.neighbors[vertex]
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// An edge shared by exactly two faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteriorEdge {
    pub v0: usize,
    pub v1: usize,
    pub left_face: usize,
    pub right_face: usize,
}

/// All interior (two-faced) edges of a mesh; boundary edges are excluded.
#[derive(Debug, Clone)]
pub struct EdgeAdjacency {
    interior_edges: Vec<InteriorEdge>,
    boundary_edges: usize,
}

impl EdgeAdjacency {
    pub fn interior_edges(&self) -> &[InteriorEdge] {
        &self.interior_edges
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_edges
    }

    /// True when every edge of the source mesh had exactly two incident faces.
    pub fn is_closed(&self) -> bool {
        self.boundary_edges == 0
    }
}

/// Neighbor sets from shared face edges. Symmetric by construction.
pub fn vertex_adjacency(mesh: &Mesh) -> VertexAdjacency {
    let mut neighbors = vec![Vec::new(); mesh.vertex_count()];
    for f in mesh.faces() {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    VertexAdjacency { neighbors }
}

/// Collects edges with exactly two incident faces, erroring on non-manifold
/// edges (more than two). Edges are listed in ascending (v0, v1) order.
pub fn edge_adjacency(mesh: &Mesh) -> Result<EdgeAdjacency> {
    let mut incident: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let key = (a.min(b), a.max(b));
            incident.entry(key).or_default().push(fi);
        }
    }
    let mut keys: Vec<(usize, usize)> = incident.keys().copied().collect();
    keys.sort_unstable();

    let mut interior_edges = Vec::new();
    let mut boundary_edges = 0;
    for key in keys {
        let faces = &incident[&key];
        match faces.len() {
            1 => boundary_edges += 1,
            2 => {
                // Orient: left is the face traversing the edge as v0 -> v1.
                let (v0, v1) = key;
                let traverses = |fi: usize| {
                    let f = mesh.faces()[fi];
                    [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])].contains(&(v0, v1))
                };
                let (left_face, right_face) = if traverses(faces[0]) {
                    (faces[0], faces[1])
                } else {
                    (faces[1], faces[0])
                };
                interior_edges.push(InteriorEdge {
                    v0,
                    v1,
                    left_face,
                    right_face,
                });
            }
            n => {
                return Err(Error::NonManifoldEdge {
                    v0: key.0,
                    v1: key.1,
                    count: n,
                })
            }
        }
    }
    Ok(EdgeAdjacency {
        interior_edges,
        boundary_edges,
    })
}

/// Template sphere: icosahedron refined by midpoint subdivision, vertices
/// re-projected to the sphere after every split. Vertex count is
/// `10 * 4^s + 2`, so subdivision 3 yields the 642-vertex template.
pub fn icosphere(subdivisions: u32, radius: f64) -> Result<Mesh> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::SubdivisionTooDeep {
            requested: subdivisions,
            max: MAX_SUBDIVISIONS,
        });
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "icosphere radius must be positive, got {radius}"
        )));
    }

    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    for v in &mut vertices {
        *v = vec3::scale(vec3::normalize(*v), radius);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut split = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = vec3::scale(vec3::add(vertices[a], vertices[b]), 0.5);
                vertices.push(vec3::scale(vec3::normalize(m), radius));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = split(a, b, &mut vertices);
            let bc = split(b, c, &mut vertices);
            let ca = split(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    Mesh::new(vertices, faces)
}

/// Axis-aligned box centered at the origin with the given half extents,
/// triangulated with outward-facing counterclockwise winding.
pub fn cuboid(half_extents: Vec3) -> Result<Mesh> {
    let [hx, hy, hz] = half_extents;
    if !(hx > 0.0 && hy > 0.0 && hz > 0.0) {
        return Err(Error::InvalidConfig(
            "cuboid half extents must be positive".into(),
        ));
    }
    let vertices = vec![
        [-hx, -hy, -hz],
        [hx, -hy, -hz],
        [hx, hy, -hz],
        [-hx, hy, -hz],
        [-hx, -hy, hz],
        [hx, -hy, hz],
        [hx, hy, hz],
        [-hx, hy, hz],
    ];
    let faces = vec![
        [4, 5, 6],
        [4, 6, 7], // +z
        [1, 0, 3],
        [1, 3, 2], // -z
        [0, 4, 7],
        [0, 7, 3], // -x
        [5, 1, 2],
        [5, 2, 6], // +x
        [3, 7, 6],
        [3, 6, 2], // +y
        [0, 1, 5],
        [0, 5, 4], // -y
    ];
    Mesh::new(vertices, faces)
}
