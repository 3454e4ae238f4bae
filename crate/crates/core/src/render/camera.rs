#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

use super::RenderError;
use crate::{Mat3, Vec3};

/// Pinhole camera with zero roll.
///
/// The view direction is `(cos e cos a, cos e sin a, sin e)` in a z-up world.
/// Camera space has x to the right, y down and z along the view direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub elevation: f64,
    pub azimuth: f64,
    /// Vertical field of view, radians.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(position: Vec3, elevation: f64, azimuth: f64, fov_y: f64, width: u32, height: u32) -> Result<Self, RenderError> {
        if !(fov_y > 0.0 && fov_y < core::f64::consts::PI) {
            return Err(RenderError::BadCamera("field of view must lie in (0, pi)"));
        }
        if width == 0 || height == 0 {
            return Err(RenderError::BadCamera("resolution must be at least 1x1"));
        }
        if position.iter().chain([elevation, azimuth].iter()).any(|v| !v.is_finite()) {
            return Err(RenderError::BadCamera("non-finite pose"));
        }
        Ok(Self { position, elevation, azimuth, fov_y, width, height })
    }

    /// Camera at `position` looking at `target`.
    pub fn looking_at(position: Vec3, target: Vec3, fov_y: f64, width: u32, height: u32) -> Result<Self, RenderError> {
        let v = target - position;
        let len = v.norm();
        if !(len > 0.0) {
            return Err(RenderError::BadCamera("target coincides with position"));
        }
        let elevation = (v.z / len).clamp(-1.0, 1.0).asin();
        let azimuth = v.y.atan2(v.x);
        Self::new(position, elevation, azimuth, fov_y, width, height)
    }

    pub fn forward(&self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vec3::new(ce * ca, ce * sa, se)
    }

    /// Rows are the camera's right, down and forward axes in world space.
    pub fn world_to_camera(&self) -> Mat3 {
        let f = self.forward();
        let (sa, ca) = self.azimuth.sin_cos();
        let r = Vec3::new(sa, -ca, 0.0);
        let d = f.cross(&r);
        Mat3::from_rows(&[r.transpose(), d.transpose(), f.transpose()])
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.fov_y).tan()
    }

    /// Horizontal field of view implied by the aspect ratio.
    pub fn fov_x(&self) -> f64 {
        2.0 * (0.5 * self.width as f64 / self.focal()).atan()
    }

    /// Camera-space ray through the center of pixel (`row`, `col`), scaled
    /// so its z component is 1; the ray parameter is then camera depth.
    pub fn pixel_ray(&self, row: usize, col: usize) -> Vec3 {
        let f = self.focal();
        Vec3::new(
            (col as f64 + 0.5 - 0.5 * self.width as f64) / f,
            (row as f64 + 0.5 - 0.5 * self.height as f64) / f,
            1.0,
        )
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.world_to_camera() * (p - self.position)
    }

    /// Continuous pixel coordinates `(x, y)` of a camera-space point in front
    /// of the camera.
    pub fn project(&self, pc: &Vec3) -> Option<(f64, f64)> {
        if pc.z <= 0.0 {
            return None;
        }
        let f = self.focal();
        Some((f * pc.x / pc.z + 0.5 * self.width as f64, f * pc.y / pc.z + 0.5 * self.height as f64))
    }

    /// Whether a world point projects inside the image, in front of the camera.
    pub fn sees(&self, p: &Vec3) -> bool {
        match self.project(&self.to_camera(p)) {
            Some((x, y)) => (0.0..=self.width as f64).contains(&x) && (0.0..=self.height as f64).contains(&y),
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_right_handed_and_z_up() {
        let c = Camera::new(Vec3::zeros(), 0.3, 1.1, 1.0, 8, 8).unwrap();
        let r = c.world_to_camera();
        assert!((r * r.transpose() - Mat3::identity()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        // Looking along +x: image down is world -z, image right is world -y.
        let c = Camera::new(Vec3::zeros(), 0.0, 0.0, 1.0, 8, 8).unwrap();
        assert!((c.to_camera(&Vec3::new(1.0, 0.0, -0.5)) - Vec3::new(0.0, 0.5, 1.0)).norm() < 1e-12);
        assert!((c.to_camera(&Vec3::new(1.0, -0.5, 0.0)) - Vec3::new(0.5, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn center_ray_is_optical_axis_for_even_sizes() {
        let c = Camera::new(Vec3::zeros(), 0.0, 0.0, 1.0, 4, 4).unwrap();
        let a = c.pixel_ray(1, 1);
        let b = c.pixel_ray(2, 2);
        assert!(((a + b) * 0.5 - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn looking_at_points_forward_at_target() {
        let c = Camera::looking_at(Vec3::new(1.0, 2.0, 1.0), Vec3::new(-1.0, 0.0, 0.5), 1.0, 8, 8).unwrap();
        let p = c.to_camera(&Vec3::new(-1.0, 0.0, 0.5));
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12 && p.z > 0.0);
        assert!(Camera::new(Vec3::zeros(), 0.0, 0.0, 3.2, 8, 8).is_err());
        assert!(Camera::new(Vec3::zeros(), 0.0, 0.0, 1.0, 0, 8).is_err());
    }
}
