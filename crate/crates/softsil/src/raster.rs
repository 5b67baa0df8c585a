//! Soft silhouette rasterization with an analytic backward pass.
//!
//! Every face contributes a coverage probability to every pixel:
//! `D = sigmoid(delta * d^2 / sigma)` with `d` the screen-space distance from
//! the pixel center to the triangle's edges and `delta` the inside/outside
//! sign. A silhouette pixel fuses all faces as `1 - prod (1 - D_j)`, a
//! differentiable stand-in for the logical OR of a standard rasterizer. The
//! backward pass pushes a pixel-space loss gradient through the aggregation,
//! the sigmoid, the closest-point distance, and the projection Jacobian down
//! to world-space vertex positions.
//!
//! Far-field work is pruned without changing a single bit of the rendered
//! values: once `d^2 / sigma` exceeds [`SKIP_EXPONENT`] for an outside
//! pixel, the face's factor in the coverage product rounds to exactly 1.0
//! in f64, so skipping it is invisible (see the constant's docs for the
//! argument). An optional truncation mode prunes much more aggressively but
//! genuinely alters values and zeroes long-range gradients, so it is off by
//! default.
//!
//! Determinism: pixels are processed in fixed row bands and faces in
//! ascending index order, and per-vertex gradients are reduced face by face
//! in ascending order, so results are bitwise identical regardless of the
//! rayon thread count.

use rayon::prelude::*;

use crate::camera::{pixel_center, project, Camera};
use crate::error::{Error, Result};
use crate::geom::{closest_edge_point, point_in_triangle, softplus, Point2};
use crate::mesh::Mesh;
use crate::vec3::{self, Vec3};

/// Outside-pixel cutoff on `d^2 / sigma`. Beyond it the face probability
/// `t = exp(-d^2/sigma)` falls under 2^-54, so the product factor `1 - t`
/// rounds to exactly 1.0 (the identity) and, once a pixel has switched to
/// log accumulation, `|log(1 - t)| <= 1.1e-16` vanishes below the ulp of a
/// log sum that is at most -20.7 by construction. Skipping such pairs is
/// therefore bitwise invisible in the forward pass; the gradient terms it
/// drops are below 2e-17 of the local gradient scale.
pub const SKIP_EXPONENT: f64 = 39.0;

/// Per-pixel accumulation switches to log space once any face probability
/// exceeds this, keeping the product representable.
const LOG_SWITCH: f64 = 1.0 - 1e-9;

/// Truncation mode drops face-pixel pairs whose probability falls below
/// 1e-7, i.e. `d^2 / sigma > ln(1/eps - 1)`.
const TRUNCATION_EXPONENT: f64 = 16.118095650958317; // ln(1e7 - 1)

/// Number of image rows per parallel work unit. Fixed so that chunk
/// boundaries (and therefore results) do not depend on the thread count.
const ROW_BAND: usize = 8;

/// Positive sharpness parameter of the probability map; smaller values give
/// harder silhouettes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sharpness(f64);

impl Sharpness {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Sharpness(sigma))
        } else {
            Err(Error::InvalidConfig(format!(
                "sigma must be positive and finite, got {sigma}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Sharpness {
    fn default() -> Self {
        Sharpness(3e-5)
    }
}

/// h x w real-valued silhouette in scan-line order (row-major, top row
/// first).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSilhouette {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SoftSilhouette {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} silhouette", width, height),
                got: format!("{} values", values.len()),
            });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig(
                "silhouette values must lie in [0, 1]".into(),
            ));
        }
        Ok(SoftSilhouette {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// h x w boolean coverage mask in scan-line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} mask", width, height),
                got: format!("{} values", values.len()),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn at(&self, row: usize, col: usize) -> bool {
        self.values[row * self.width + col]
    }

    pub fn count_true(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

/// h x w RGB image in scan-line order.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    values: Vec<[f64; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, values: Vec<[f64; 3]>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} image", width, height),
                got: format!("{} pixels", values.len()),
            });
        }
        Ok(ColorImage {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn at(&self, row: usize, col: usize) -> [f64; 3] {
        self.values[row * self.width + col]
    }
}

/// Per-vertex loss gradients produced by the backward passes.
#[derive(Debug, Clone)]
pub struct GradientBuffer {
    pub d_vertices: Vec<Vec3>,
    pub d_colors: Option<Vec<Vec3>>,
}

impl GradientBuffer {
    pub fn zeros(vertex_count: usize) -> Self {
        GradientBuffer {
            d_vertices: vec![[0.0; 3]; vertex_count],
            d_colors: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        let vertices_ok = self
            .d_vertices
            .iter()
            .all(|g| g.iter().all(|x| x.is_finite()));
        let colors_ok = self
            .d_colors
            .as_ref()
            .is_none_or(|cs| cs.iter().all(|g| g.iter().all(|x| x.is_finite())));
        vertices_ok && colors_ok
    }
}

/// Forward rendering options; see the module docs for the truncation
/// trade-off.
#[derive(Debug, Clone, Copy, Default)]
pub struct RasterOptions {
    pub truncation: bool,
}

/// Inclusive pixel rectangle covered by a face (possibly dilated).
#[derive(Debug, Clone, Copy)]
struct PixelRect {
    row0: usize,
    row1: usize,
    col0: usize,
    col1: usize,
}

impl PixelRect {
    fn rows_in_band(&self, band_start: usize, band_end: usize) -> Option<(usize, usize)> {
        let r0 = self.row0.max(band_start);
        let r1 = self.row1.min(band_end - 1);
        (r0 <= r1).then_some((r0, r1))
    }
}

#[derive(Debug, Clone, Copy)]
struct ScreenFace {
    pts: [Point2; 3],
    min: Point2,
    max: Point2,
    rect: Option<PixelRect>,
}

/// Conservative pixel range whose centers can fall within `radius` of the
/// axis-aligned box [min, max]. Over-covering by a pixel is harmless; the
/// per-pixel tests decide.
fn pixel_rect(min: Point2, max: Point2, radius: f64, width: usize, height: usize) -> Option<PixelRect> {
    let xmin = min[0] - radius;
    let xmax = max[0] + radius;
    let ymin = min[1] - radius;
    let ymax = max[1] + radius;

    let w = width as f64;
    let h = height as f64;
    let col0 = (((xmin + 1.0) * w - 1.0) / 2.0).floor() as i64;
    let col1 = (((xmax + 1.0) * w - 1.0) / 2.0).ceil() as i64;
    // Screen y decreases with the row index.
    let row0 = (((1.0 - ymax) * h - 1.0) / 2.0).floor() as i64;
    let row1 = (((1.0 - ymin) * h - 1.0) / 2.0).ceil() as i64;

    if col1 < 0 || row1 < 0 || col0 >= width as i64 || row0 >= height as i64 {
        return None;
    }
    Some(PixelRect {
        row0: row0.max(0) as usize,
        row1: row1.min(height as i64 - 1) as usize,
        col0: col0.max(0) as usize,
        col1: col1.min(width as i64 - 1) as usize,
    })
}

fn screen_faces(mesh: &Mesh, camera: &Camera, dilation: f64) -> Result<Vec<ScreenFace>> {
    let projected = project(mesh, camera)?;
    let faces = mesh
        .faces()
        .iter()
        .map(|f| {
            let pts = [
                projected.screen_xy[f[0]],
                projected.screen_xy[f[1]],
                projected.screen_xy[f[2]],
            ];
            let min = [
                pts[0][0].min(pts[1][0]).min(pts[2][0]),
                pts[0][1].min(pts[1][1]).min(pts[2][1]),
            ];
            let max = [
                pts[0][0].max(pts[1][0]).max(pts[2][0]),
                pts[0][1].max(pts[1][1]).max(pts[2][1]),
            ];
            ScreenFace {
                pts,
                min,
                max,
                rect: pixel_rect(min, max, dilation, camera.width, camera.height),
            }
        })
        .collect();
    Ok(faces)
}

#[inline]
fn dist_sq_to_box(p: Point2, min: Point2, max: Point2) -> f64 {
    let dx = (min[0] - p[0]).max(0.0).max(p[0] - max[0]);
    let dy = (min[1] - p[1]).max(0.0).max(p[1] - max[1]);
    dx * dx + dy * dy
}

/// Probability map value from the sigmoid argument `x = delta * d^2 / sigma`,
/// computed with a single exponential.
#[inline]
fn probability_from_arg(x: f64) -> f64 {
    let t = (-x.abs()).exp();
    if x >= 0.0 {
        1.0 / (1.0 + t)
    } else {
        t / (1.0 + t)
    }
}

/// Soft silhouette with exact (non-truncated) far-field handling.
pub fn render_soft(mesh: &Mesh, camera: &Camera, sigma: Sharpness) -> Result<SoftSilhouette> {
    render_soft_with(mesh, camera, sigma, RasterOptions::default())
}

/// Soft silhouette with explicit options.
pub fn render_soft_with(
    mesh: &Mesh,
    camera: &Camera,
    sigma: Sharpness,
    options: RasterOptions,
) -> Result<SoftSilhouette> {
    let s = sigma.value();
    let skip_exponent = if options.truncation {
        TRUNCATION_EXPONENT
    } else {
        SKIP_EXPONENT
    };
    let cutoff_sq = skip_exponent * s;
    let faces = screen_faces(mesh, camera, cutoff_sq.sqrt())?;
    let (w, h) = (camera.width, camera.height);

    // Per-pixel accumulator: a plain product of (1 - D) until some D crosses
    // LOG_SWITCH, then a running sum of log(1 - D).
    let mut acc = vec![1.0_f64; w * h];
    let mut log_mode = vec![false; w * h];

    let bands: Vec<(&mut [f64], &mut [bool])> = acc
        .chunks_mut(ROW_BAND * w)
        .zip(log_mode.chunks_mut(ROW_BAND * w))
        .collect();
    bands
        .into_par_iter()
        .enumerate()
        .for_each(|(band_idx, (acc_band, mode_band))| {
            let band_start = band_idx * ROW_BAND;
            let band_end = (band_start + ROW_BAND).min(h);
            for face in &faces {
                let Some(rect) = face.rect else { continue };
                let Some((r0, r1)) = rect.rows_in_band(band_start, band_end) else {
                    continue;
                };
                for row in r0..=r1 {
                    for col in rect.col0..=rect.col1 {
                        let p = pixel_center(row, col, w, h);
                        if dist_sq_to_box(p, face.min, face.max) > cutoff_sq {
                            continue;
                        }
                        let d2 = closest_edge_point(p, face.pts).dist_sq;
                        let delta = point_in_triangle(p, face.pts);
                        // Far outside: the probability underflows to exactly
                        // zero. Far inside it saturates to one instead and
                        // must still enter the product.
                        if delta < 0.0 && d2 > cutoff_sq {
                            continue;
                        }
                        let x = delta * d2 / s;
                        let idx = (row - band_start) * w + col;
                        if mode_band[idx] {
                            acc_band[idx] -= softplus(x);
                        } else {
                            let d_prob = probability_from_arg(x);
                            if d_prob > LOG_SWITCH {
                                acc_band[idx] = acc_band[idx].ln() - softplus(x);
                                mode_band[idx] = true;
                            } else {
                                acc_band[idx] *= 1.0 - d_prob;
                            }
                        }
                    }
                }
            }
        });

    let values = acc
        .into_iter()
        .zip(log_mode)
        .map(|(a, log)| 1.0 - if log { a.exp() } else { a })
        .collect();
    Ok(SoftSilhouette {
        width: w,
        height: h,
        values,
    })
}

/// Reference hard rasterizer: a pixel is solid iff its center lies inside
/// (or on the boundary of) any projected triangle. All faces participate;
/// silhouettes are orientation-independent.
pub fn render_hard(mesh: &Mesh, camera: &Camera) -> Result<BinaryMask> {
    let faces = screen_faces(mesh, camera, 0.0)?;
    let (w, h) = (camera.width, camera.height);
    let mut values = vec![false; w * h];

    values
        .chunks_mut(ROW_BAND * w)
        .collect::<Vec<_>>()
        .into_par_iter()
        .enumerate()
        .for_each(|(band_idx, band)| {
            let band_start = band_idx * ROW_BAND;
            let band_end = (band_start + ROW_BAND).min(h);
            for face in &faces {
                let Some(rect) = face.rect else { continue };
                let Some((r0, r1)) = rect.rows_in_band(band_start, band_end) else {
                    continue;
                };
                for row in r0..=r1 {
                    for col in rect.col0..=rect.col1 {
                        let idx = (row - band_start) * w + col;
                        if band[idx] {
                            continue;
                        }
                        let p = pixel_center(row, col, w, h);
                        if point_in_triangle(p, face.pts) > 0.0 {
                            band[idx] = true;
                        }
                    }
                }
            }
        });

    Ok(BinaryMask {
        width: w,
        height: h,
        values,
    })
}

/// One cached face-pixel interaction from the first backward sweep.
#[derive(Clone, Copy)]
struct PairTerm {
    /// log(1 - D) for this pair.
    log_one_minus: f64,
    /// delta * D (1 - D) / sigma, the derivative of D w.r.t. d^2.
    dcoef: f64,
    /// Clamped parameter along the closest edge.
    t: f64,
    /// Closest edge index (0, 1, 2).
    edge: u8,
}

struct FaceCache {
    rect: PixelRect,
    pairs: Vec<PairTerm>,
}

/// Screen-space gradient of a vertex packed with its world Jacobian rows.
struct VertexJacobian {
    d_screen_x: Vec3,
    d_screen_y: Vec3,
}

fn vertex_jacobians(mesh: &Mesh, camera: &Camera) -> Result<Vec<VertexJacobian>> {
    let eye = camera.position();
    let [right, up, forward] = camera.basis();
    let (sx, sy) = camera.frustum_scales();
    let mut jacobians = Vec::with_capacity(mesh.vertex_count());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let rel = vec3::sub(*v, eye);
        let z = vec3::dot(forward, rel);
        if z <= crate::camera::NEAR_PLANE {
            return Err(Error::VertexBehindCamera { vertex: i, cam_z: z });
        }
        let x = vec3::dot(right, rel);
        let y = vec3::dot(up, rel);
        let screen_x = x / (z * sx);
        let screen_y = y / (z * sy);
        // d(screen_x)/dv = right / (z sx) - screen_x/z * forward, and the
        // analogous row for screen_y.
        jacobians.push(VertexJacobian {
            d_screen_x: vec3::sub(vec3::scale(right, 1.0 / (z * sx)), vec3::scale(forward, screen_x / z)),
            d_screen_y: vec3::sub(vec3::scale(up, 1.0 / (z * sy)), vec3::scale(forward, screen_y / z)),
        });
    }
    Ok(jacobians)
}

const EDGE_SLOTS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Analytic backward pass: distributes `upstream = dL/dS` (scan-line order,
/// one value per pixel) onto world-space vertex positions.
///
/// Chain: `dS/dD_j = prod_{k != j} (1 - D_k)` via per-pixel log sums,
/// `dD/d(d^2) = delta D (1 - D) / sigma` with the inside/outside sign held
/// locally constant, `d(d^2)` flowing to the one or two vertices that define
/// the closest boundary point, and the projection Jacobian mapping screen
/// gradients back to world space.
pub fn backward_soft(
    mesh: &Mesh,
    camera: &Camera,
    sigma: Sharpness,
    upstream: &[f64],
) -> Result<GradientBuffer> {
    let (w, h) = (camera.width, camera.height);
    if upstream.len() != w * h {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} upstream", w, h),
            got: format!("{} values", upstream.len()),
        });
    }
    if upstream.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite {
            context: "upstream gradient".into(),
        });
    }

    let s = sigma.value();
    let cutoff_sq = SKIP_EXPONENT * s;
    let faces = screen_faces(mesh, camera, cutoff_sq.sqrt())?;
    let jacobians = vertex_jacobians(mesh, camera)?;

    // Sweep 1 (parallel over faces): cache every face-pixel term.
    let caches: Vec<Option<FaceCache>> = faces
        .par_iter()
        .map(|face| {
            let rect = face.rect?;
            let mut pairs =
                Vec::with_capacity((rect.row1 - rect.row0 + 1) * (rect.col1 - rect.col0 + 1));
            for row in rect.row0..=rect.row1 {
                for col in rect.col0..=rect.col1 {
                    let p = pixel_center(row, col, w, h);
                    if dist_sq_to_box(p, face.min, face.max) > cutoff_sq {
                        pairs.push(PairTerm {
                            log_one_minus: 0.0,
                            dcoef: 0.0,
                            t: 0.0,
                            edge: 0,
                        });
                        continue;
                    }
                    let closest = closest_edge_point(p, face.pts);
                    let delta = point_in_triangle(p, face.pts);
                    if delta < 0.0 && closest.dist_sq > cutoff_sq {
                        pairs.push(PairTerm {
                            log_one_minus: 0.0,
                            dcoef: 0.0,
                            t: 0.0,
                            edge: 0,
                        });
                        continue;
                    }
                    let x = delta * closest.dist_sq / s;
                    // softplus(x) and D (1 - D) share one exponential.
                    let e = (-x.abs()).exp();
                    let denom = 1.0 + e;
                    pairs.push(PairTerm {
                        log_one_minus: -(x.max(0.0) + e.ln_1p()),
                        dcoef: delta * (e / (denom * denom)) / s,
                        t: closest.t,
                        edge: closest.edge as u8,
                    });
                }
            }
            Some(FaceCache { rect, pairs })
        })
        .collect();

    // Sweep 2 (sequential, ascending face index): per-pixel total log sums.
    let mut log_total = vec![0.0_f64; w * h];
    for cache in caches.iter().flatten() {
        let mut k = 0;
        for row in cache.rect.row0..=cache.rect.row1 {
            for col in cache.rect.col0..=cache.rect.col1 {
                log_total[row * w + col] += cache.pairs[k].log_one_minus;
                k += 1;
            }
        }
    }

    // Sweep 3 (parallel over faces): screen-space gradients per face corner,
    // pixels visited in scan-line order.
    let face_grads: Vec<[Point2; 3]> = faces
        .par_iter()
        .zip(&caches)
        .map(|(face, cache)| {
            let mut grads = [[0.0; 2]; 3];
            let Some(cache) = cache else { return grads };
            let mut k = 0;
            for row in cache.rect.row0..=cache.rect.row1 {
                for col in cache.rect.col0..=cache.rect.col1 {
                    let pair = cache.pairs[k];
                    k += 1;
                    let u = upstream[row * w + col];
                    if pair.dcoef == 0.0 || u == 0.0 {
                        continue;
                    }
                    // Leave-one-out product prod_{k != j} (1 - D_k).
                    let weight = (log_total[row * w + col] - pair.log_one_minus).exp();
                    let g = u * weight * pair.dcoef;
                    if g == 0.0 {
                        continue;
                    }
                    let (ia, ib) = EDGE_SLOTS[pair.edge as usize];
                    let a = face.pts[ia];
                    let b = face.pts[ib];
                    let t = pair.t;
                    let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let p = pixel_center(row, col, w, h);
                    // d(d^2)/dq = 2 (q - p), split between the edge endpoints.
                    let gx = g * 2.0 * (q[0] - p[0]);
                    let gy = g * 2.0 * (q[1] - p[1]);
                    grads[ia][0] += (1.0 - t) * gx;
                    grads[ia][1] += (1.0 - t) * gy;
                    grads[ib][0] += t * gx;
                    grads[ib][1] += t * gy;
                }
            }
            grads
        })
        .collect();

    // Final reduction in ascending face order for bitwise determinism.
    let mut buffer = GradientBuffer::zeros(mesh.vertex_count());
    for (f, grads) in mesh.faces().iter().zip(&face_grads) {
        for slot in 0..3 {
            let vi = f[slot];
            let j = &jacobians[vi];
            let g = grads[slot];
            for axis in 0..3 {
                buffer.d_vertices[vi][axis] += g[0] * j.d_screen_x[axis] + g[1] * j.d_screen_y[axis];
            }
        }
    }
    Ok(buffer)
}

/// Barycentric color of face `pts`/`colors` at the clamped closest point to
/// `p`: the pixel itself when inside, the nearest boundary point otherwise.
#[inline]
fn face_color_weights(p: Point2, pts: [Point2; 3], inside: bool) -> [f64; 3] {
    if inside {
        let v0 = [pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]];
        let v1 = [pts[2][0] - pts[0][0], pts[2][1] - pts[0][1]];
        let v2 = [p[0] - pts[0][0], p[1] - pts[0][1]];
        let den = v0[0] * v1[1] - v1[0] * v0[1];
        if den.abs() > crate::geom::DEGENERATE_AREA_EPS {
            let beta = (v2[0] * v1[1] - v1[0] * v2[1]) / den;
            let gamma = (v0[0] * v2[1] - v2[0] * v0[1]) / den;
            return [1.0 - beta - gamma, beta, gamma];
        }
    }
    let closest = closest_edge_point(p, pts);
    let (ia, ib) = EDGE_SLOTS[closest.edge];
    let mut weights = [0.0; 3];
    weights[ia] = 1.0 - closest.t;
    weights[ib] = closest.t;
    weights
}

const COLOR_DENOM_EPS: f64 = 1e-8;

/// Probability-weighted color compositing: each pixel is the D-weighted
/// average of per-face colors sampled at the clamped closest point, with a
/// small epsilon keeping zero-coverage pixels near black.
pub fn render_color(mesh: &Mesh, camera: &Camera, sigma: Sharpness) -> Result<ColorImage> {
    let colors = mesh.colors().ok_or(Error::MissingColors)?;
    let s = sigma.value();
    let cutoff_sq = SKIP_EXPONENT * s;
    let faces = screen_faces(mesh, camera, cutoff_sq.sqrt())?;
    let (w, h) = (camera.width, camera.height);

    let mut num = vec![[0.0_f64; 3]; w * h];
    let mut den = vec![0.0_f64; w * h];
    let bands: Vec<(&mut [[f64; 3]], &mut [f64])> = num
        .chunks_mut(ROW_BAND * w)
        .zip(den.chunks_mut(ROW_BAND * w))
        .collect();
    bands
        .into_par_iter()
        .enumerate()
        .for_each(|(band_idx, (num_band, den_band))| {
            let band_start = band_idx * ROW_BAND;
            let band_end = (band_start + ROW_BAND).min(h);
            for (face, f) in faces.iter().zip(mesh.faces()) {
                let Some(rect) = face.rect else { continue };
                let Some((r0, r1)) = rect.rows_in_band(band_start, band_end) else {
                    continue;
                };
                let face_colors = [colors[f[0]], colors[f[1]], colors[f[2]]];
                for row in r0..=r1 {
                    for col in rect.col0..=rect.col1 {
                        let p = pixel_center(row, col, w, h);
                        if dist_sq_to_box(p, face.min, face.max) > cutoff_sq {
                            continue;
                        }
                        let d2 = closest_edge_point(p, face.pts).dist_sq;
                        let delta = point_in_triangle(p, face.pts);
                        if delta < 0.0 && d2 > cutoff_sq {
                            continue;
                        }
                        let d_prob = probability_from_arg(delta * d2 / s);
                        let weights = face_color_weights(p, face.pts, delta > 0.0);
                        let idx = (row - band_start) * w + col;
                        for c in 0..3 {
                            let channel = weights[0] * face_colors[0][c]
                                + weights[1] * face_colors[1][c]
                                + weights[2] * face_colors[2][c];
                            num_band[idx][c] += d_prob * channel;
                        }
                        den_band[idx] += d_prob;
                    }
                }
            }
        });

    let values = num
        .into_iter()
        .zip(den)
        .map(|(n, d)| {
            let inv = 1.0 / (d + COLOR_DENOM_EPS);
            [n[0] * inv, n[1] * inv, n[2] * inv]
        })
        .collect();
    Ok(ColorImage {
        width: w,
        height: h,
        values,
    })
}

/// Backward pass of [`render_color`] onto per-vertex colors. Vertex-position
/// gradients of color images are out of scope, so `d_vertices` stays zero.
pub fn backward_color(
    mesh: &Mesh,
    camera: &Camera,
    sigma: Sharpness,
    upstream: &ColorImage,
) -> Result<GradientBuffer> {
    let colors_len = mesh.colors().ok_or(Error::MissingColors)?.len();
    let (w, h) = (camera.width, camera.height);
    if upstream.width != w || upstream.height != h {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} upstream", w, h),
            got: format!("{}x{}", upstream.width, upstream.height),
        });
    }
    if !upstream.values.iter().all(|v| v.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite {
            context: "upstream color gradient".into(),
        });
    }

    let s = sigma.value();
    let cutoff_sq = SKIP_EXPONENT * s;
    let faces = screen_faces(mesh, camera, cutoff_sq.sqrt())?;

    // Denominator per pixel, accumulated in ascending face order.
    let mut den = vec![0.0_f64; w * h];
    den.chunks_mut(ROW_BAND * w)
        .collect::<Vec<_>>()
        .into_par_iter()
        .enumerate()
        .for_each(|(band_idx, den_band)| {
            let band_start = band_idx * ROW_BAND;
            let band_end = (band_start + ROW_BAND).min(h);
            for face in &faces {
                let Some(rect) = face.rect else { continue };
                let Some((r0, r1)) = rect.rows_in_band(band_start, band_end) else {
                    continue;
                };
                for row in r0..=r1 {
                    for col in rect.col0..=rect.col1 {
                        let p = pixel_center(row, col, w, h);
                        if dist_sq_to_box(p, face.min, face.max) > cutoff_sq {
                            continue;
                        }
                        let d2 = closest_edge_point(p, face.pts).dist_sq;
                        let delta = point_in_triangle(p, face.pts);
                        if delta < 0.0 && d2 > cutoff_sq {
                            continue;
                        }
                        den_band[(row - band_start) * w + col] +=
                            probability_from_arg(delta * d2 / s);
                    }
                }
            }
        });

    // Per-face color gradients, then an ordered reduction.
    let face_grads: Vec<[Vec3; 3]> = faces
        .par_iter()
        .map(|face| {
            let mut grads = [[0.0; 3]; 3];
            let Some(rect) = face.rect else { return grads };
            for row in rect.row0..=rect.row1 {
                for col in rect.col0..=rect.col1 {
                    let p = pixel_center(row, col, w, h);
                    if dist_sq_to_box(p, face.min, face.max) > cutoff_sq {
                        continue;
                    }
                    let d2 = closest_edge_point(p, face.pts).dist_sq;
                    let delta = point_in_triangle(p, face.pts);
                    if delta < 0.0 && d2 > cutoff_sq {
                        continue;
                    }
                    let d_prob = probability_from_arg(delta * d2 / s);
                    if d_prob == 0.0 {
                        continue;
                    }
                    let weights = face_color_weights(p, face.pts, delta > 0.0);
                    let scale = d_prob / (den[row * w + col] + COLOR_DENOM_EPS);
                    let u = upstream.values[row * w + col];
                    for slot in 0..3 {
                        if weights[slot] == 0.0 {
                            continue;
                        }
                        for c in 0..3 {
                            grads[slot][c] += scale * weights[slot] * u[c];
                        }
                    }
                }
            }
            grads
        })
        .collect();

    let mut d_colors = vec![[0.0_f64; 3]; colors_len];
    for (f, grads) in mesh.faces().iter().zip(&face_grads) {
        for slot in 0..3 {
            for c in 0..3 {
                d_colors[f[slot]][c] += grads[slot][c];
            }
        }
    }

    let mut buffer = GradientBuffer::zeros(mesh.vertex_count());
    buffer.d_colors = Some(d_colors);
    Ok(buffer)
}
