use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::pose::{normalize_2d, PoseSequence2D, PoseSequence3D};
use crate::synthgen::motion::RootTrajectory;

/// Minimum depth, in millimetres, for a projectable joint.
pub const MIN_DEPTH_MM: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_px: f64,
    pub principal_point_px: (f64, f64),
    pub width_px: u32,
    pub height_px: u32,
    pub subject_distance_mm: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal_px: 1145.0,
            principal_point_px: (500.0, 500.0),
            width_px: 1000,
            height_px: 1000,
            subject_distance_mm: 5000.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0) {
            return Err(validation("camera.focal_px must be positive"));
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(validation("camera frame size must be positive"));
        }
        let (cx, cy) = self.principal_point_px;
        if !(0.0..=f64::from(self.width_px)).contains(&cx)
            || !(0.0..=f64::from(self.height_px)).contains(&cy)
        {
            return Err(validation("camera.principal_point_px must lie inside the frame"));
        }
        if !(self.subject_distance_mm > 0.0) {
            return Err(validation("camera.subject_distance_mm must be positive"));
        }
        Ok(())
    }
}

/// Pinhole projection of root-relative poses placed along `root`, with the
/// stage centre at depth `subject_distance_mm` on the optical axis.
pub fn project(
    camera: &CameraModel,
    pose: &PoseSequence3D,
    root: &RootTrajectory,
) -> Result<PoseSequence2D> {
    camera.validate()?;
    if root.positions.len() != pose.frames {
        return Err(validation(format!(
            "root trajectory has {} frames, pose has {}",
            root.positions.len(),
            pose.frames
        )));
    }
    let (cx, cy) = camera.principal_point_px;
    let mut pixels = Vec::with_capacity(pose.frames * pose.joints * 2);
    for t in 0..pose.frames {
        let r = root.positions[t];
        for j in 0..pose.joints {
            let p = pose.get(t, j);
            let (x, y, z) = (p[0] + r[0], p[1] + r[1], p[2] + r[2] + camera.subject_distance_mm);
            if !(z > MIN_DEPTH_MM) {
                return Err(validation(format!(
                    "joint {j} at frame {t} is not in front of the camera (depth {z:.1} mm)"
                )));
            }
            pixels.push(camera.focal_px * x / z + cx);
            pixels.push(camera.focal_px * y / z + cy);
        }
    }
    normalize_2d(&pixels, pose.frames, pose.joints, camera.width_px, camera.height_px)
}
