//! 2D screen-space primitives behind the per-face probability map: the
//! inside/outside indicator, the pixel-to-triangle edge distance with its
//! closest-point witness, and numerically stable sigmoid helpers.

pub type Point2 = [f64; 2];

/// Projected triangles with twice-the-signed-area below this count as
/// degenerate: they are treated as outside everywhere (indicator -1) and
/// still contribute through their edge distances.
pub const DEGENERATE_AREA_EPS: f64 = 1e-12;

#[inline]
fn edge_function(a: Point2, b: Point2, p: Point2) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Signed inside/outside indicator: +1.0 if `p` is inside or on the boundary
/// of the triangle, -1.0 otherwise. Winding-independent: the point is inside
/// when the three edge functions do not differ in sign (zeros allowed).
/// Degenerate triangles return -1.0.
pub fn point_in_triangle(p: Point2, tri: [Point2; 3]) -> f64 {
    let area2 = edge_function(tri[0], tri[1], tri[2]);
    if area2.abs() < DEGENERATE_AREA_EPS {
        return -1.0;
    }
    let e0 = edge_function(tri[0], tri[1], p);
    let e1 = edge_function(tri[1], tri[2], p);
    let e2 = edge_function(tri[2], tri[0], p);
    let any_pos = e0 > 0.0 || e1 > 0.0 || e2 > 0.0;
    let any_neg = e0 < 0.0 || e1 < 0.0 || e2 < 0.0;
    if any_pos && any_neg {
        -1.0
    } else {
        1.0
    }
}

/// Closest point of a triangle's boundary to a query pixel: which edge, the
/// clamped segment parameter, the point itself, and the squared distance.
#[derive(Debug, Clone, Copy)]
pub struct EdgeClosest {
    /// Edge index: 0 = (v0, v1), 1 = (v1, v2), 2 = (v2, v0).
    pub edge: usize,
    /// Clamped parameter along the edge, in [0, 1].
    pub t: f64,
    pub point: Point2,
    pub dist_sq: f64,
}

#[inline]
fn closest_on_segment(a: Point2, b: Point2, p: Point2) -> (f64, Point2, f64) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len_sq > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    (t, q, dx * dx + dy * dy)
}

/// Minimum over the three closed edge segments. Ties between edges resolve
/// to the lowest edge index (strict improvement required to switch).
pub fn closest_edge_point(p: Point2, tri: [Point2; 3]) -> EdgeClosest {
    let mut best = EdgeClosest {
        edge: 0,
        t: 0.0,
        point: tri[0],
        dist_sq: f64::INFINITY,
    };
    for (edge, (a, b)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
        .into_iter()
        .enumerate()
    {
        let (t, q, d2) = closest_on_segment(a, b, p);
        if d2 < best.dist_sq {
            best = EdgeClosest {
                edge,
                t,
                point: q,
                dist_sq: d2,
            };
        }
    }
    best
}

/// Shortest Euclidean distance from `p` to the triangle's boundary. Zero
/// exactly on the boundary, positive elsewhere (inside or outside).
pub fn distance_to_triangle(p: Point2, tri: [Point2; 3]) -> f64 {
    closest_edge_point(p, tri).dist_sq.sqrt()
}

/// Squared distance from `p` to each of the three closed edge segments.
pub fn edge_distances_sq(p: Point2, tri: [Point2; 3]) -> [f64; 3] {
    let (_, _, d0) = closest_on_segment(tri[0], tri[1], p);
    let (_, _, d1) = closest_on_segment(tri[1], tri[2], p);
    let (_, _, d2) = closest_on_segment(tri[2], tri[0], p);
    [d0, d1, d2]
}

/// Numerically stable logistic function; branches on the sign so the
/// exponential never overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow; equals -log(1 - sigmoid(x)).
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// sigmoid(x) * (1 - sigmoid(x)), accurate for large |x| where the naive
/// product rounds to zero.
#[inline]
pub fn sigmoid_deriv(x: f64) -> f64 {
    let t = (-x.abs()).exp();
    let denom = 1.0 + t;
    t / (denom * denom)
}

/// Per-face coverage probability at one pixel: `sigmoid(delta * d^2 / sigma)`
/// with delta the inside/outside indicator and d the edge distance. Boundary
/// pixels yield exactly 0.5.
pub fn face_probability(p: Point2, tri: [Point2; 3], sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let delta = point_in_triangle(p, tri);
    let d2 = closest_edge_point(p, tri).dist_sq;
    sigmoid(delta * d2 / sigma)
}

/// Coverage-probability fusion approximating a logical OR:
/// `1 - prod_j (1 - D_j)`, taken in list order.
pub fn aggregate(probabilities: &[f64]) -> f64 {
    let mut product = 1.0;
    for &d in probabilities {
        product *= 1.0 - d;
    }
    1.0 - product
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: [Point2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    /// Brute-force oracle: minimum distance to 1e5 points sampled along the
    /// three closed edges.
    fn brute_force_distance(p: Point2, tri: [Point2; 3]) -> f64 {
        let mut best = f64::INFINITY;
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            let samples = 100_000;
            for k in 0..=samples {
                let t = k as f64 / samples as f64;
                let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                best = best.min(d);
            }
        }
        best
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(point_in_triangle([0.25, 0.25], TRI), 1.0);
        assert_eq!(point_in_triangle([2.0, 0.0], TRI), -1.0);
        assert_eq!(point_in_triangle([0.5, 0.0], TRI), 1.0); // on an edge
    }

    #[test]
    fn indicator_is_winding_independent() {
        let flipped = [TRI[0], TRI[2], TRI[1]];
        assert_eq!(point_in_triangle([0.25, 0.25], flipped), 1.0);
        assert_eq!(point_in_triangle([2.0, 0.0], flipped), -1.0);
    }

    #[test]
    fn degenerate_triangle_is_outside_everywhere() {
        let line = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert_eq!(point_in_triangle([0.5, 0.0], line), -1.0);
        assert_eq!(point_in_triangle([0.5, 0.5], line), -1.0);
    }

    #[test]
    fn distance_inside_point() {
        // Closest edge of (0.25, 0.25) is either leg at distance 0.25.
        let d = distance_to_triangle([0.25, 0.25], TRI);
        assert!((d - 0.25).abs() < 1e-12);
        assert!((d - brute_force_distance([0.25, 0.25], TRI)).abs() < 1e-4);
    }

    #[test]
    fn distance_outside_vertex_region() {
        let d = distance_to_triangle([2.0, 0.0], TRI);
        assert!((d - 1.0).abs() < 1e-12);
        assert!((d - brute_force_distance([2.0, 0.0], TRI)).abs() < 1e-4);
    }

    #[test]
    fn distance_zero_on_edge_midpoint() {
        assert_eq!(distance_to_triangle([0.5, 0.0], TRI), 0.0);
    }

    #[test]
    fn distance_matches_brute_force_on_grid() {
        for i in 0..12 {
            for j in 0..12 {
                let p = [-0.8 + 0.25 * i as f64, -0.8 + 0.25 * j as f64];
                let fast = distance_to_triangle(p, TRI);
                let slow = brute_force_distance(p, TRI);
                assert!((fast - slow).abs() < 1e-4, "at {p:?}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn tie_prefers_lowest_edge_index() {
        // The incenter of TRI is equidistant to all three edges.
        let r = (2.0 - 2.0_f64.sqrt()) / 2.0; // inradius of the right triangle
        let q = closest_edge_point([r, r], TRI);
        assert_eq!(q.edge, 0);
        assert!((q.dist_sq.sqrt() - r).abs() < 1e-12);
    }

    #[test]
    fn probability_examples() {
        // On the boundary the argument is zero regardless of sigma.
        assert_eq!(face_probability([0.5, 0.0], TRI, 0.3), 0.5);

        let p = face_probability([0.25, 0.25], TRI, 0.0625);
        assert!((p - sigmoid(1.0)).abs() < 1e-12);
        assert!((p - 0.7310585786300049).abs() < 1e-12);

        let p = face_probability([2.0, 0.0], TRI, 1.0);
        assert!((p - sigmoid(-1.0)).abs() < 1e-12);
        assert!((p - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn probability_splits_at_half() {
        // Inside pixels land in (0.5, 1), outside pixels in (0, 0.5).
        assert!(face_probability([0.2, 0.2], TRI, 0.1) > 0.5);
        assert!(face_probability([-0.2, -0.2], TRI, 0.1) < 0.5);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(softplus(800.0).is_finite());
        assert!((softplus(-3.0) - (1.0 + (-3.0f64).exp()).ln()).abs() < 1e-15);
        assert!((sigmoid_deriv(40.0) - (-40.0f64).exp()).abs() < 1e-50);
    }

    #[test]
    fn boundary_probability_is_continuous() {
        // D as a function of pixel position is continuous across the edge and
        // its spatial derivative vanishes there (the composite delta * d^2 has
        // zero gradient on the boundary).
        let sigma = 1e-3;
        let mut prev = None;
        for k in -50..=50 {
            let y = k as f64 * 1e-4;
            let d = face_probability([0.4, y], TRI, sigma);
            if let Some(p) = prev {
                let diff: f64 = d - p;
                assert!(diff.abs() < 2e-3, "jump at y={y}: {diff}");
                // Near the edge the slope must shrink toward zero.
                if y.abs() < 2e-4 {
                    assert!(diff.abs() < 5e-4);
                }
            }
            prev = Some(d);
        }
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[]), 0.0);
        assert!((aggregate(&[0.5, 0.5]) - 0.75).abs() < 1e-15);
        let single = [0.3125];
        assert_eq!(aggregate(&single), 0.3125);
    }
}
