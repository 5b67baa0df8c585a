//! View parameterization and perspective projection.
//!
//! A camera is given by azimuth/elevation/distance on a sphere around the
//! origin, looking at the origin with +y up (falling back to ∓z at the
//! poles). Projection lands in the normalized [-1, 1] screen frame with x
//! right and y up; pixel (0, 0) is the top-left corner in scan-line order.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::vec3::{self, Vec3};

/// Distance along the view axis below which a vertex counts as behind the
/// camera. No clipping is implemented; fitting keeps geometry near the
/// origin, so crossing the near plane is an error.
pub const NEAR_PLANE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance: f64,
    pub fov_y_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Camera {
    /// Distance 2.732 and a 30 degree vertical field of view frame a
    /// half-unit-radius sphere at roughly half of a 64x64 image.
    fn default() -> Self {
        Camera {
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            distance: 2.732,
            fov_y_deg: 30.0,
            width: 64,
            height: 64,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(Error::InvalidConfig(format!(
                "fov_y must be in (0, 180) degrees, got {}",
                self.fov_y_deg
            )));
        }
        if !(self.distance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "camera distance must be positive, got {}",
                self.distance
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig(
                "image size must be at least 1x1".into(),
            ));
        }
        Ok(())
    }

    /// Camera position: `distance * (cos e sin a, sin e, cos e cos a)`.
    pub fn position(&self) -> Vec3 {
        let a = self.azimuth_deg.to_radians();
        let e = self.elevation_deg.to_radians();
        [
            self.distance * e.cos() * a.sin(),
            self.distance * e.sin(),
            self.distance * e.cos() * a.cos(),
        ]
    }

    /// Orthonormal view basis (right, up, forward), forward pointing from the
    /// camera toward the origin. At the poles the +y up hint degenerates and
    /// -z (elevation > 0) or +z (elevation < 0) is used instead.
    pub fn basis(&self) -> [Vec3; 3] {
        let eye = self.position();
        let forward = vec3::normalize(vec3::scale(eye, -1.0));
        let mut up_hint = [0.0, 1.0, 0.0];
        if vec3::norm(vec3::cross(forward, up_hint)) < 1e-9 {
            up_hint = if self.elevation_deg >= 0.0 {
                [0.0, 0.0, -1.0]
            } else {
                [0.0, 0.0, 1.0]
            };
        }
        let right = vec3::normalize(vec3::cross(forward, up_hint));
        let up = vec3::cross(right, forward);
        [right, up, forward]
    }

    /// Half-extent scale factors of the screen frame: a camera-space point
    /// maps to `x / (z * sx)`, `y / (z * sy)`.
    pub(crate) fn frustum_scales(&self) -> (f64, f64) {
        let t = (self.fov_y_deg.to_radians() / 2.0).tan();
        let aspect = self.width as f64 / self.height as f64;
        (t * aspect, t)
    }
}

/// Vertices projected to the normalized screen frame plus their distance
/// along the viewing axis.
#[derive(Debug, Clone)]
pub struct ProjectedMesh {
    pub screen_xy: Vec<[f64; 2]>,
    pub cam_z: Vec<f64>,
}

/// Perspective projection of every vertex. Errors with the offending vertex
/// index if any vertex is not strictly in front of the near plane.
pub fn project(mesh: &Mesh, camera: &Camera) -> Result<ProjectedMesh> {
    camera.validate()?;
    let eye = camera.position();
    let [right, up, forward] = camera.basis();
    let (sx, sy) = camera.frustum_scales();

    let mut screen_xy = Vec::with_capacity(mesh.vertex_count());
    let mut cam_z = Vec::with_capacity(mesh.vertex_count());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let rel = vec3::sub(*v, eye);
        let z = vec3::dot(forward, rel);
        if z <= NEAR_PLANE {
            return Err(Error::VertexBehindCamera { vertex: i, cam_z: z });
        }
        let x = vec3::dot(right, rel);
        let y = vec3::dot(up, rel);
        screen_xy.push([x / (z * sx), y / (z * sy)]);
        cam_z.push(z);
    }
    Ok(ProjectedMesh { screen_xy, cam_z })
}

/// Center of pixel (row, col) in the normalized frame. Row 0 is the top of
/// the image, so y decreases with the row index.
pub fn pixel_center(row: usize, col: usize, width: usize, height: usize) -> [f64; 2] {
    debug_assert!(row < height && col < width);
    [
        (2.0 * col as f64 + 1.0) / width as f64 - 1.0,
        1.0 - (2.0 * row as f64 + 1.0) / height as f64,
    ]
}

/// 24 azimuths (15 degree steps) at 30 degrees elevation.
pub fn ring24(distance: f64, fov_y_deg: f64, size: usize) -> Vec<Camera> {
    (0..24)
        .map(|k| Camera {
            azimuth_deg: 15.0 * k as f64,
            elevation_deg: 30.0,
            distance,
            fov_y_deg,
            width: size,
            height: size,
        })
        .collect()
}

/// The same 24 azimuths at five elevations (-30, -15, 0, 15, 30 degrees).
pub fn grid120(distance: f64, fov_y_deg: f64, size: usize) -> Vec<Camera> {
    let mut cameras = Vec::with_capacity(120);
    for elevation in [-30.0, -15.0, 0.0, 15.0, 30.0] {
        for k in 0..24 {
            cameras.push(Camera {
                azimuth_deg: 15.0 * k as f64,
                elevation_deg: elevation,
                distance,
                fov_y_deg,
                width: size,
                height: size,
            });
        }
    }
    cameras
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, Mesh};

    fn cam(azimuth: f64, elevation: f64, distance: f64) -> Camera {
        Camera {
            azimuth_deg: azimuth,
            elevation_deg: elevation,
            distance,
            ..Camera::default()
        }
    }

    #[test]
    fn position_examples() {
        let p = cam(0.0, 0.0, 2.0).position();
        assert!((p[0]).abs() < 1e-12 && (p[1]).abs() < 1e-12 && (p[2] - 2.0).abs() < 1e-12);

        let p = cam(90.0, 0.0, 1.0).position();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
    }

    #[test]
    fn pole_uses_fallback_up() {
        let c = cam(0.0, 90.0, 1.0);
        let p = c.position();
        assert!((p[1] - 1.0).abs() < 1e-12);
        let [right, up, forward] = c.basis();
        assert!((vec3::dot(up, [0.0, 0.0, -1.0]) - 1.0).abs() < 1e-9);
        assert!((vec3::norm(right) - 1.0).abs() < 1e-12);
        assert!((vec3::dot(forward, [0.0, -1.0, 0.0]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn azimuth_wraps_after_full_turn() {
        let a = cam(33.0, 12.0, 3.0).position();
        let b = cam(33.0 + 360.0, 12.0, 3.0).position();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_projects_to_screen_center() {
        let mesh = Mesh::new(vec![[0.0, 0.0, 0.0]], vec![]).unwrap();
        for camera in [cam(0.0, 0.0, 2.0), cam(123.0, -40.0, 5.0)] {
            let proj = project(&mesh, &camera).unwrap();
            assert!(proj.screen_xy[0][0].abs() < 1e-12);
            assert!(proj.screen_xy[0][1].abs() < 1e-12);
        }
    }

    #[test]
    fn frustum_top_edge_maps_to_unit_y() {
        let camera = cam(0.0, 0.0, 2.0);
        let t = (camera.fov_y_deg.to_radians() / 2.0).tan();
        let mesh = Mesh::new(vec![[0.0, 2.0 * t, 0.0]], vec![]).unwrap();
        let proj = project(&mesh, &camera).unwrap();
        assert!(proj.screen_xy[0][0].abs() < 1e-12);
        assert!((proj.screen_xy[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_unit_sphere_fits_in_frame_at_defaults() {
        // Bound check oracle: evaluate every vertex.
        let mesh = icosphere(1, 0.5).unwrap();
        let proj = project(&mesh, &Camera::default()).unwrap();
        for p in &proj.screen_xy {
            assert!(p[0].abs() < 1.0 && p[1].abs() < 1.0, "vertex at {p:?}");
        }
    }

    #[test]
    fn vertex_behind_camera_is_named() {
        let mesh = Mesh::new(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 5.0]], vec![]).unwrap();
        match project(&mesh, &cam(0.0, 0.0, 2.0)) {
            Err(Error::VertexBehindCamera { vertex, .. }) => assert_eq!(vertex, 1),
            other => panic!("expected behind-camera error, got {other:?}"),
        }
    }

    #[test]
    fn pixel_center_examples() {
        // Top-left pixel of a 64-wide image: (2*0+1)/64 - 1 = -63/64.
        let p = pixel_center(0, 0, 64, 64);
        assert_eq!(p, [-0.984375, 0.984375]);
        let p = pixel_center(31, 31, 64, 64);
        assert!((p[0] + 1.0 / 64.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(pixel_center(0, 0, 1, 1), [0.0, 0.0]);
    }

    #[test]
    fn pixel_centers_are_uniform() {
        let (w, h) = (17usize, 9usize);
        for r in 0..h {
            for c in 0..w.saturating_sub(1) {
                let a = pixel_center(r, c, w, h);
                let b = pixel_center(r, c + 1, w, h);
                assert!((b[0] - a[0] - 2.0 / w as f64).abs() < 1e-15);
            }
        }
        for r in 0..h.saturating_sub(1) {
            let a = pixel_center(r, 0, w, h);
            let b = pixel_center(r + 1, 0, w, h);
            assert!((a[1] - b[1] - 2.0 / h as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn mesh_rotation_matches_opposite_azimuth_change() {
        let mesh = icosphere(1, 0.5).unwrap();
        let delta: f64 = 37.0;
        let (sin, cos) = delta.to_radians().sin_cos();
        let rotated: Vec<[f64; 3]> = mesh
            .vertices()
            .iter()
            .map(|v| [v[0] * cos + v[2] * sin, v[1], -v[0] * sin + v[2] * cos])
            .collect();
        let rotated = mesh.with_vertices(rotated).unwrap();

        let base = cam(20.0, 30.0, 2.732);
        let shifted = cam(20.0 - delta, 30.0, 2.732);
        let a = project(&rotated, &base).unwrap();
        let b = project(&mesh, &shifted).unwrap();
        for (pa, pb) in a.screen_xy.iter().zip(&b.screen_xy) {
            assert!((pa[0] - pb[0]).abs() < 1e-9);
            assert!((pa[1] - pb[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn view_set_shapes() {
        let ring = ring24(2.732, 30.0, 64);
        assert_eq!(ring.len(), 24);
        assert!(ring.iter().all(|c| c.elevation_deg == 30.0));

        let grid = grid120(2.732, 30.0, 64);
        assert_eq!(grid.len(), 120);
        let mut elevations: Vec<f64> = grid.iter().map(|c| c.elevation_deg).collect();
        elevations.dedup();
        assert_eq!(elevations.len(), 5);
    }
}
