//! Pinhole camera mounted on the ego vehicle.

use crate::geom::{Vec2, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, degrees.
    pub hfov_deg: f64,
    /// Mount height above the road plane, meters.
    pub mount_height: f64,
    /// Forward offset from the vehicle center, meters.
    pub mount_forward: f64,
    /// Downward pitch, degrees. Positive tips the view toward the road.
    pub pitch_deg: f64,
    pub far_plane: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 800,
            height: 600,
            hfov_deg: 90.0,
            mount_height: 1.4,
            mount_forward: 1.0,
            pitch_deg: 5.0,
            far_plane: 100.0,
        }
    }
}

impl CameraConfig {
    pub fn with_size(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }

    /// Focal length in pixels, shared by both axes (square pixels).
    pub fn focal_px(&self) -> f64 {
        self.width as f64 / 2.0 / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    /// Camera origin and orthonormal view triad (forward, right, up) for an
    /// ego at `pos` with `heading`. World z is up; the ground is z = 0.
    pub fn pose(&self, pos: Vec2, heading: f64) -> (Vec3, Vec3, Vec3, Vec3) {
        let f2 = Vec2::from_heading(heading);
        let origin = Vec3 {
            x: pos.x + f2.x * self.mount_forward,
            y: pos.y + f2.y * self.mount_forward,
            z: self.mount_height,
        };
        let (sp, cp) = self.pitch_deg.to_radians().sin_cos();
        let forward = Vec3 {
            x: cp * f2.x,
            y: cp * f2.y,
            z: -sp,
        };
        let right = Vec3 {
            x: -f2.y,
            y: f2.x,
            z: 0.0,
        };
        let up = Vec3 {
            x: sp * f2.x,
            y: sp * f2.y,
            z: cp,
        };
        (origin, forward, right, up)
    }

    /// World-space ray direction through pixel center (px, py), normalized.
    pub fn ray(&self, forward: Vec3, right: Vec3, up: Vec3, px: usize, py: usize) -> Vec3 {
        let f = self.focal_px();
        let u = px as f64 + 0.5 - self.width as f64 / 2.0;
        let v = self.height as f64 / 2.0 - (py as f64 + 0.5);
        let d = Vec3 {
            x: forward.x * f + right.x * u + up.x * v,
            y: forward.y * f + right.y * u + up.y * v,
            z: forward.z * f + right.z * u + up.z * v,
        };
        let n = d.norm();
        d.scale(1.0 / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn triad_is_orthonormal() {
        let cam = CameraConfig::default();
        let (_, f, r, u) = cam.pose(Vec2::new(3.0, -2.0), 0.8);
        assert_relative_eq!(f.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.dot(r), 0.0, epsilon = 1e-12);
        assert_relative_eq!(f.dot(u), 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.dot(u), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn right_vector_points_right_of_heading() {
        let cam = CameraConfig::default();
        // Heading +x; right of the vehicle is +y under this world chirality.
        let (_, _, r, _) = cam.pose(Vec2::new(0.0, 0.0), 0.0);
        assert_relative_eq!(r.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pitch_tips_forward_down() {
        let cam = CameraConfig::default();
        let (_, f, _, _) = cam.pose(Vec2::new(0.0, 0.0), 0.0);
        assert!(f.z < 0.0, "positive pitch must look below the horizon");
    }

    #[test]
    fn hfov_matches_edge_rays() {
        let cam = CameraConfig::with_size(320, 240);
        let (_, f, r, u) = cam.pose(Vec2::new(0.0, 0.0), 0.0);
        let left = cam.ray(f, r, u, 0, cam.height / 2);
        let right_ray = cam.ray(f, r, u, cam.width - 1, cam.height / 2);
        let cosang = left.dot(right_ray);
        // Both edge rays sit at (±uu, vv) in the image plane; the angle
        // between them follows from the dot product of (fl, ±uu, vv).
        let fl = cam.focal_px();
        let uu = cam.width as f64 / 2.0 - 0.5;
        let vv = -0.5;
        let expected = ((fl * fl - uu * uu + vv * vv) / (fl * fl + uu * uu + vv * vv)).acos();
        assert_relative_eq!(cosang.acos(), expected, epsilon = 1e-12);
        // Just under the configured 90 degrees because pixel centers sit
        // half a pixel inside the image edges.
        assert!(expected.to_degrees() < 90.0 && expected.to_degrees() > 89.0);
    }

    #[test]
    fn center_ray_is_forward() {
        let cam = CameraConfig::with_size(321, 241);
        let (_, f, r, u) = cam.pose(Vec2::new(1.0, 2.0), 1.1);
        let ray = cam.ray(f, r, u, 160, 120);
        assert_relative_eq!(ray.dot(f), 1.0, epsilon = 1e-9);
    }
}
