//! Silhouette and geometry losses with analytic gradients.
//!
//! The image term is an intersection-over-union loss between the rendered
//! soft silhouette and a binary target. Two regularizers keep the deforming
//! mesh well behaved: a Laplacian term penalizing each vertex's offset from
//! the centroid of its neighbors, and a flattening term `(cos theta + 1)^2`
//! per interior edge that vanishes when adjacent faces are coplanar. All
//! gradients are exact derivatives of the values, verified against finite
//! differences in the tests.

use crate::error::{Error, Result};
use crate::mesh::{EdgeAdjacency, Mesh, VertexAdjacency};
use crate::raster::{BinaryMask, ColorImage, SoftSilhouette};
use crate::vec3::{self, Vec3};

/// Weights of the regularizers in the total loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 0.01,
            mu: 0.001,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.mu < 0.0 {
            return Err(Error::InvalidConfig(
                "loss weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-iteration loss breakdown. `total` is the weighted sum
/// `iou + lambda * laplacian + mu * flattening` plus the color term when
/// color fitting is enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub iou: f64,
    pub laplacian: f64,
    pub flattening: f64,
    pub color: Option<f64>,
    pub total: f64,
}

/// IoU loss `1 - |S_hat * S| / |S_hat + S - S_hat * S|` between a soft
/// silhouette and a binary target, with its gradient w.r.t. every soft
/// pixel (the target is a constant).
///
/// When both images are empty the loss is defined as 0 with a zero gradient
/// and a degenerate-input warning is logged.
pub fn iou_loss(soft: &SoftSilhouette, target: &BinaryMask) -> Result<(f64, Vec<f64>)> {
    if soft.width() != target.width() || soft.height() != target.height() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", soft.width(), soft.height()),
            got: format!("{}x{}", target.width(), target.height()),
        });
    }
    let mut intersection = 0.0;
    let mut union = 0.0;
    for (&s_hat, &s) in soft.values().iter().zip(target.values()) {
        let s = if s { 1.0 } else { 0.0 };
        intersection += s_hat * s;
        union += s_hat + s - s_hat * s;
    }
    if union == 0.0 {
        log::warn!("iou_loss: both silhouettes are empty; returning loss 0");
        return Ok((0.0, vec![0.0; soft.values().len()]));
    }
    let loss = 1.0 - intersection / union;
    let inv_union_sq = 1.0 / (union * union);
    let grad = target
        .values()
        .iter()
        .map(|&s| {
            let s = if s { 1.0 } else { 0.0 };
            -(s * union - intersection * (1.0 - s)) * inv_union_sq
        })
        .collect();
    Ok((loss, grad))
}

/// Sum of squared Laplacian coordinates `sum_i |v_i - mean(N(i))|^2` with
/// its exact gradient, including the cross terms from vertex j appearing in
/// the neighbor means of its neighbors.
pub fn laplacian_loss(mesh: &Mesh, adjacency: &VertexAdjacency) -> Result<(f64, Vec<Vec3>)> {
    let n = mesh.vertex_count();
    if adjacency.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("adjacency over {n} vertices"),
            got: format!("{}", adjacency.len()),
        });
    }
    let vertices = mesh.vertices();
    let mut loss = 0.0;
    let mut grad = vec![[0.0_f64; 3]; n];
    for i in 0..n {
        let neighbors = adjacency.neighbors(i);
        if neighbors.is_empty() {
            return Err(Error::IsolatedVertex(i));
        }
        let inv = 1.0 / neighbors.len() as f64;
        let mut mean = [0.0_f64; 3];
        for &j in neighbors {
            mean = vec3::add(mean, vertices[j]);
        }
        mean = vec3::scale(mean, inv);
        let delta = vec3::sub(vertices[i], mean);
        loss += vec3::dot(delta, delta);
        grad[i] = vec3::add(grad[i], vec3::scale(delta, 2.0));
        for &j in neighbors {
            grad[j] = vec3::sub(grad[j], vec3::scale(delta, 2.0 * inv));
        }
    }
    Ok((loss, grad))
}

const FACE_AREA_EPS: f64 = 1e-12;

fn face_normal(mesh: &Mesh, face: usize) -> Result<(Vec3, f64)> {
    let [a, b, c] = mesh.faces()[face];
    let vs = mesh.vertices();
    let n = vec3::cross(vec3::sub(vs[b], vs[a]), vec3::sub(vs[c], vs[a]));
    let len = vec3::norm(n);
    // |n| is twice the face area.
    if len <= 2.0 * FACE_AREA_EPS {
        return Err(Error::DegenerateFace(face));
    }
    Ok((n, len))
}

/// Adds the adjoint `w` on an unnormalized face normal back onto the three
/// face vertices. With edges e1 = b - a, e2 = c - a and n = e1 x e2:
/// dn = dv1 x e2 + e1 x dv2 - dv0 x e2 - e1 x dv0.
fn distribute_normal_adjoint(mesh: &Mesh, face: usize, w: Vec3, grad: &mut [Vec3]) {
    let [a, b, c] = mesh.faces()[face];
    let vs = mesh.vertices();
    let e1 = vec3::sub(vs[b], vs[a]);
    let e2 = vec3::sub(vs[c], vs[a]);
    let g_b = vec3::cross(e2, w);
    let g_c = vec3::cross(w, e1);
    grad[b] = vec3::add(grad[b], g_b);
    grad[c] = vec3::add(grad[c], g_c);
    grad[a] = vec3::sub(grad[a], vec3::add(g_b, g_c));
}

/// Flattening loss `sum (cos theta + 1)^2` over interior edges, where theta
/// is the interior dihedral angle: `cos theta = -(n_l . n_r)` with face
/// normals oriented by the stored winding, so coplanar neighbors contribute
/// zero. Errors if an incident face is degenerate.
pub fn flattening_loss(mesh: &Mesh, edges: &EdgeAdjacency) -> Result<(f64, Vec<Vec3>)> {
    let mut loss = 0.0;
    let mut grad = vec![[0.0_f64; 3]; mesh.vertex_count()];
    for edge in edges.interior_edges() {
        let (n_l, len_l) = face_normal(mesh, edge.left_face)?;
        let (n_r, len_r) = face_normal(mesh, edge.right_face)?;
        let nh_l = vec3::scale(n_l, 1.0 / len_l);
        let nh_r = vec3::scale(n_r, 1.0 / len_r);
        let cos_theta = -vec3::dot(nh_l, nh_r);
        let term = cos_theta + 1.0;
        loss += term * term;

        // d(term^2)/d(nh_l) = 2 term * (-nh_r); project through the
        // normalization Jacobian (I - nh nh^T) / |n|.
        let coef = 2.0 * term;
        for (face, nh, other, len) in [
            (edge.left_face, nh_l, nh_r, len_l),
            (edge.right_face, nh_r, nh_l, len_r),
        ] {
            let g_nh = vec3::scale(other, -coef);
            let w = vec3::scale(
                vec3::sub(g_nh, vec3::scale(nh, vec3::dot(nh, g_nh))),
                1.0 / len,
            );
            distribute_normal_adjoint(mesh, face, w, &mut grad);
        }
    }
    Ok((loss, grad))
}

/// Mean squared error over pixels and channels, with its gradient
/// `2 (C_hat - C) / (h w 3)` per rendered pixel.
pub fn color_l2_loss(rendered: &ColorImage, target: &ColorImage) -> Result<(f64, ColorImage)> {
    if rendered.width() != target.width() || rendered.height() != target.height() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", rendered.width(), rendered.height()),
            got: format!("{}x{}", target.width(), target.height()),
        });
    }
    let count = (rendered.values().len() * 3) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(rendered.values().len());
    for (r, t) in rendered.values().iter().zip(target.values()) {
        let mut g = [0.0; 3];
        for c in 0..3 {
            let diff = r[c] - t[c];
            loss += diff * diff;
            g[c] = 2.0 * diff / count;
        }
        grad.push(g);
    }
    let grad = ColorImage::new(rendered.width(), rendered.height(), grad)?;
    Ok((loss / count, grad))
}

/// Weighted sum of the loss components.
pub fn total_loss(
    iou: f64,
    laplacian: f64,
    flattening: f64,
    color: Option<f64>,
    weights: &LossWeights,
) -> Result<LossReport> {
    let components = [Some(iou), Some(laplacian), Some(flattening), color];
    if components.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite {
            context: "loss component".into(),
        });
    }
    let total =
        iou + weights.lambda * laplacian + weights.mu * flattening + color.unwrap_or(0.0);
    Ok(LossReport {
        iou,
        laplacian,
        flattening,
        color,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{edge_adjacency, icosphere, vertex_adjacency};
    
    fn mask(width: usize, height: usize, values: Vec<bool>) -> BinaryMask {
        BinaryMask::new(width, height, values).unwrap()
    }

    fn soft_image(width: usize, height: usize, values: Vec<f64>) -> SoftSilhouette {
        SoftSilhouette::new(width, height, values).unwrap()
    }

    #[test]
    fn iou_zero_when_equal_binary() {
        let soft = soft_image(2, 2, vec![1.0, 0.0, 1.0, 0.0]);
        let target = mask(2, 2, vec![true, false, true, false]);
        let (loss, _) = iou_loss(&soft, &target).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn iou_one_when_disjoint() {
        let soft = soft_image(2, 2, vec![1.0, 0.0, 0.0, 0.0]);
        let target = mask(2, 2, vec![false, true, true, false]);
        let (loss, _) = iou_loss(&soft, &target).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn iou_overlapping_thirds() {
        // soft covers A and B, target covers B and C, all the same size.
        let soft = soft_image(3, 1, vec![1.0, 1.0, 0.0]);
        let target = mask(3, 1, vec![false, true, true]);
        let (loss, _) = iou_loss(&soft, &target).unwrap();
        assert!((loss - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn iou_symmetric_for_binary_inputs() {
        let a = vec![true, false, true, true, false, false];
        let b = vec![true, true, false, true, false, true];
        let soft_a = soft_image(3, 2, a.iter().map(|&x| x as u8 as f64).collect());
        let soft_b = soft_image(3, 2, b.iter().map(|&x| x as u8 as f64).collect());
        let (ab, _) = iou_loss(&soft_a, &mask(3, 2, b)).unwrap();
        let (ba, _) = iou_loss(&soft_b, &mask(3, 2, a)).unwrap();
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn iou_degenerate_empty_inputs() {
        let soft = soft_image(2, 1, vec![0.0, 0.0]);
        let target = mask(2, 1, vec![false, false]);
        let (loss, grad) = iou_loss(&soft, &target).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn iou_gradient_matches_finite_differences() {
        let values = vec![0.8, 0.2, 0.5, 0.9, 0.1, 0.4, 0.7, 0.3];
        let target = mask(4, 2, vec![true, false, true, true, false, false, true, false]);
        let soft = soft_image(4, 2, values.clone());
        let (_, grad) = iou_loss(&soft, &target).unwrap();
        let h = 1e-6;
        for i in 0..values.len() {
            let mut plus = values.clone();
            plus[i] += h;
            let mut minus = values.clone();
            minus[i] -= h;
            let (lp, _) = iou_loss(&soft_image(4, 2, plus), &target).unwrap();
            let (lm, _) = iou_loss(&soft_image(4, 2, minus), &target).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() / fd.abs().max(1e-12) < 1e-6,
                "pixel {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn laplacian_zero_when_all_vertices_coincide() {
        // The only configuration with every vertex at its neighbors' centroid
        // on a connected graph is a constant one.
        let m = Mesh::new(vec![[0.3, -0.2, 0.9]; 3], vec![[0, 1, 2]]).unwrap();
        let adj = vertex_adjacency(&m);
        let (loss, grad) = laplacian_loss(&m, &adj).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| g.iter().all(|&x| x == 0.0)));
    }

    /// Central finite differences over the checked vertices; errors are
    /// measured relative to the largest finite-difference component so that
    /// symmetry-induced near-zero entries do not dominate.
    fn assert_grad_matches_fd(
        eval: impl Fn(&Mesh) -> f64,
        mesh: &Mesh,
        grad: &[Vec3],
        check: &[usize],
        tol: f64,
    ) {
        let h = 1e-6;
        let mut fd = Vec::new();
        for &vi in check {
            for axis in 0..3 {
                let mut plus = mesh.vertices().to_vec();
                plus[vi][axis] += h;
                let mut minus = mesh.vertices().to_vec();
                minus[vi][axis] -= h;
                let lp = eval(&mesh.with_vertices(plus).unwrap());
                let lm = eval(&mesh.with_vertices(minus).unwrap());
                fd.push((lp - lm) / (2.0 * h));
            }
        }
        let scale = fd.iter().fold(1e-9_f64, |acc, g| acc.max(g.abs()));
        for (k, &vi) in check.iter().enumerate() {
            for axis in 0..3 {
                let rel = (grad[vi][axis] - fd[3 * k + axis]).abs() / scale;
                assert!(rel < tol, "vertex {vi} axis {axis}: rel err {rel}");
            }
        }
    }

    #[test]
    fn laplacian_gradient_matches_finite_differences() {
        let m = icosphere(1, 1.0).unwrap();
        let mut vertices = m.vertices().to_vec();
        vertices[7] = vec3::add(vertices[7], [1.0, 0.0, 0.0]); // displaced vertex
        let m = m.with_vertices(vertices).unwrap();
        let adj = vertex_adjacency(&m);
        let (_, grad) = laplacian_loss(&m, &adj).unwrap();
        assert_grad_matches_fd(
            |mesh| laplacian_loss(mesh, &adj).unwrap().0,
            &m,
            &grad,
            &[0, 7, 20, 41],
            1e-6,
        );
    }

    #[test]
    fn laplacian_isolated_vertex_rejected() {
        let m = Mesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 5.0, 5.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let adj = vertex_adjacency(&m);
        assert!(matches!(
            laplacian_loss(&m, &adj),
            Err(Error::IsolatedVertex(3))
        ));
    }

    fn rigid_transform(m: &Mesh) -> Mesh {
        let angle: f64 = 0.83;
        let (sin, cos) = angle.sin_cos();
        let shift = [0.4, -1.2, 2.5];
        let vertices = m
            .vertices()
            .iter()
            .map(|v| {
                let r = [v[0] * cos - v[1] * sin, v[0] * sin + v[1] * cos, v[2]];
                vec3::add(r, shift)
            })
            .collect();
        m.with_vertices(vertices).unwrap()
    }

    #[test]
    fn regularizers_invariant_under_rigid_motion() {
        let m = icosphere(1, 1.0).unwrap();
        let moved = rigid_transform(&m);
        let adj = vertex_adjacency(&m);
        let edges = edge_adjacency(&m).unwrap();
        let (lap_a, _) = laplacian_loss(&m, &adj).unwrap();
        let (lap_b, _) = laplacian_loss(&moved, &adj).unwrap();
        assert!((lap_a - lap_b).abs() < 1e-10);
        let (fl_a, _) = flattening_loss(&m, &edges).unwrap();
        let (fl_b, _) = flattening_loss(&moved, &edges).unwrap();
        assert!((fl_a - fl_b).abs() < 1e-10);
    }

    #[test]
    fn regularizer_scaling_laws() {
        // Laplacian scales quadratically with uniform scale; the flattening
        // loss depends only on angles.
        let m = icosphere(1, 1.0).unwrap();
        let scaled = m
            .with_vertices(m.vertices().iter().map(|v| vec3::scale(*v, 3.0)).collect())
            .unwrap();
        let adj = vertex_adjacency(&m);
        let edges = edge_adjacency(&m).unwrap();
        let (lap_a, _) = laplacian_loss(&m, &adj).unwrap();
        let (lap_b, _) = laplacian_loss(&scaled, &adj).unwrap();
        assert!((lap_b - 9.0 * lap_a).abs() < 1e-9 * lap_b.abs().max(1.0));
        let (fl_a, _) = flattening_loss(&m, &edges).unwrap();
        let (fl_b, _) = flattening_loss(&scaled, &edges).unwrap();
        assert!((fl_a - fl_b).abs() < 1e-10);
    }

    fn fold_mesh(angle: f64) -> Mesh {
        // Two triangles sharing the edge (0,0,0)-(0,1,0); the second face is
        // folded by `angle` out of the plane (pi = coplanar).
        let v3 = [-angle.cos(), 0.5, angle.sin()];
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.5, 0.0], v3],
            vec![[0, 1, 2], [1, 0, 3]],
        )
        .unwrap()
    }

    #[test]
    fn flattening_examples() {
        let edges = |m: &Mesh| edge_adjacency(m).unwrap();
        let coplanar = fold_mesh(0.0);
        let (loss, grad) = flattening_loss(&coplanar, &edges(&coplanar)).unwrap();
        assert!(loss.abs() < 1e-24);
        assert!(grad.iter().all(|g| g.iter().all(|&x| x.abs() < 1e-11)));

        let right_angle = fold_mesh(std::f64::consts::FRAC_PI_2);
        let (loss, _) = flattening_loss(&right_angle, &edges(&right_angle)).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);

        let folded = fold_mesh(std::f64::consts::PI);
        let (loss, _) = flattening_loss(&folded, &edges(&folded)).unwrap();
        assert!((loss - 4.0).abs() < 1e-12);
    }

    #[test]
    fn flattening_gradient_matches_finite_differences() {
        let m = fold_mesh(1.1);
        let edges = edge_adjacency(&m).unwrap();
        let (_, grad) = flattening_loss(&m, &edges).unwrap();
        assert_grad_matches_fd(
            |mesh| flattening_loss(mesh, &edges).unwrap().0,
            &m,
            &grad,
            &[0, 1, 2, 3],
            1e-5,
        );
    }

    #[test]
    fn flattening_on_sphere_gradient_matches_finite_differences() {
        let m = icosphere(1, 1.0).unwrap();
        let edges = edge_adjacency(&m).unwrap();
        let (_, grad) = flattening_loss(&m, &edges).unwrap();
        assert_grad_matches_fd(
            |mesh| flattening_loss(mesh, &edges).unwrap().0,
            &m,
            &grad,
            &[0, 13, 37],
            1e-5,
        );
    }

    #[test]
    fn flattening_degenerate_face_rejected() {
        let m = Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.5, 0.0], // collinear with the shared edge
                [-1.0, 0.5, 0.0],
            ],
            vec![[0, 1, 2], [1, 0, 3]],
        )
        .unwrap();
        let edges = edge_adjacency(&m).unwrap();
        assert!(matches!(
            flattening_loss(&m, &edges),
            Err(Error::DegenerateFace(0))
        ));
    }

    #[test]
    fn color_l2_examples() {
        let img = |v: Vec<[f64; 3]>| ColorImage::new(2, 2, v).unwrap();
        let a = img(vec![[0.2, 0.4, 0.6]; 4]);
        let (loss, _) = color_l2_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);

        let b = img(vec![[0.7, 0.9, 1.1]; 4]);
        let (loss, _) = color_l2_loss(&b, &a).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);

        let mut values = vec![[0.0; 3]; 4];
        values[2][1] = 1.0;
        let c = img(values);
        let zero = img(vec![[0.0; 3]; 4]);
        let (loss, grad) = color_l2_loss(&c, &zero).unwrap();
        assert!((loss - 1.0 / 12.0).abs() < 1e-15);
        assert!((grad.values()[2][1] - 2.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn total_loss_arithmetic() {
        let w = LossWeights::default();
        let report = total_loss(0.5, 2.0, 10.0, None, &w).unwrap();
        assert!((report.total - 0.53).abs() < 1e-15);

        let report = total_loss(0.0, 0.0, 0.0, None, &w).unwrap();
        assert_eq!(report.total, 0.0);

        let free = LossWeights {
            lambda: 0.0,
            mu: 0.0,
        };
        let report = total_loss(0.37, 5.0, 9.0, None, &free).unwrap();
        assert_eq!(report.total, 0.37);
    }

    #[test]
    fn total_loss_rejects_non_finite() {
        let w = LossWeights::default();
        assert!(total_loss(f64::NAN, 0.0, 0.0, None, &w).is_err());
        assert!(total_loss(0.0, f64::INFINITY, 0.0, None, &w).is_err());
    }
}
