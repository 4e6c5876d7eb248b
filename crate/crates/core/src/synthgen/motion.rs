//! Procedural articulated motion.
//!
//! Poses are built by forward kinematics in a body frame (x toward the
//! subject's left, y up, z forward); each bone carries a rest direction and a
//! time-varying local rotation chosen by the action. The result is expressed
//! in camera axes (X right, Y down, Z away from the camera).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::geometry::{self, Mat3, Vec3, IDENTITY};
use crate::pose::PoseSequence3D;
use crate::rng::SeededRng;
use crate::skeleton::SkeletonLayout;

/// Radius of the circular path followed when the subject drifts.
pub const DRIFT_RADIUS_MM: f64 = 900.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Walk,
    Wave,
    Squat,
    IdleSway,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Walk, Action::Wave, Action::Squat, Action::IdleSway];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub action: Action,
    pub duration_frames: usize,
    pub fps: f64,
    pub gait_period_frames: f64,
    pub amplitude_scale: f64,
    pub drift_speed_mm_per_frame: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            action: Action::Walk,
            duration_frames: 100,
            fps: 50.0,
            gait_period_frames: 50.0,
            amplitude_scale: 1.0,
            drift_speed_mm_per_frame: 0.0,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_frames < 1 {
            return Err(validation("motion.duration_frames must be >= 1"));
        }
        if !(self.fps > 0.0) {
            return Err(validation("motion.fps must be positive"));
        }
        if !(self.gait_period_frames >= 2.0) {
            return Err(validation("motion.gait_period_frames must be >= 2"));
        }
        if !(0.0..=2.0).contains(&self.amplitude_scale) {
            return Err(validation("motion.amplitude_scale must lie in [0, 2]"));
        }
        if !(self.drift_speed_mm_per_frame >= 0.0) {
            return Err(validation("motion.drift_speed_mm_per_frame must be non-negative"));
        }
        Ok(())
    }
}

/// Root positions in camera axes, relative to the stage centre.
#[derive(Clone, Debug, PartialEq)]
pub struct RootTrajectory {
    pub positions: Vec<Vec3>,
}

#[derive(Clone, Debug)]
pub struct Motion {
    pub pose: PoseSequence3D,
    pub root: RootTrajectory,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
    Center,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Hip,
    Knee,
    Ankle,
    Spine,
    Thorax,
    Head,
    Shoulder,
    Elbow,
    Wrist,
    Other,
}

fn classify(name: &str) -> (Role, Side) {
    let n = name.to_ascii_lowercase();
    let side = if n.starts_with("l_") || n.starts_with("left") {
        Side::Left
    } else if n.starts_with("r_") || n.starts_with("right") {
        Side::Right
    } else {
        Side::Center
    };
    let role = [
        ("hip", Role::Hip),
        ("knee", Role::Knee),
        ("ankle", Role::Ankle),
        ("foot", Role::Ankle),
        ("spine", Role::Spine),
        ("thorax", Role::Thorax),
        ("neck", Role::Head),
        ("head", Role::Head),
        ("nose", Role::Head),
        ("shoulder", Role::Shoulder),
        ("elbow", Role::Elbow),
        ("wrist", Role::Wrist),
        ("hand", Role::Wrist),
    ]
    .iter()
    .find(|(k, _)| n.contains(k))
    .map_or(Role::Other, |r| r.1);
    (role, side)
}

fn side_sign(side: Side) -> f64 {
    match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
        Side::Center => 0.0,
    }
}

/// Rest direction of the bone ending at each joint, in the body frame.
fn rest_directions(layout: &SkeletonLayout) -> Vec<Vec3> {
    let mut dirs = vec![[0.0, 1.0, 0.0]; layout.joint_count];
    for j in layout.topological_order() {
        let Some(parent) = layout.parent_of(j) else {
            continue;
        };
        let (role, side) = classify(&layout.joint_names[j]);
        let s = side_sign(side);
        dirs[j] = match role {
            Role::Hip | Role::Shoulder if s != 0.0 => [s, 0.0, 0.0],
            Role::Knee | Role::Ankle | Role::Elbow | Role::Wrist => [0.0, -1.0, 0.0],
            Role::Spine | Role::Thorax | Role::Head => [0.0, 1.0, 0.0],
            _ => {
                if layout.parent_of(parent).is_some() {
                    dirs[parent]
                } else {
                    [0.0, 1.0, 0.0]
                }
            }
        };
    }
    dirs
}

/// Rotation that swings a hanging limb forward by `a` radians.
fn swing(a: f64) -> Mat3 {
    geometry::rot_x(-a)
}

/// Local bone rotations at phase `phi` (radians), scaled by `amp`.
fn local_rotation(action: Action, role: Role, side: Side, phi: f64, amp: f64) -> Mat3 {
    let s = side_sign(side);
    // Right limbs lead by half a cycle.
    let lphi = if side == Side::Right { phi + PI } else { phi };
    match action {
        Action::Walk => match role {
            Role::Knee => swing(amp * 0.45 * lphi.sin()),
            Role::Ankle => swing(-amp * 0.35 * (1.0 - (lphi - 0.6).cos())),
            Role::Elbow => swing(-amp * 0.35 * lphi.sin()),
            Role::Wrist => swing(amp * (0.25 + 0.15 * (1.0 + lphi.sin()))),
            Role::Spine => geometry::mat_mul(&geometry::rot_x(-amp * 0.06), &geometry::rot_y(amp * 0.08 * phi.sin())),
            Role::Head => geometry::rot_x(amp * 0.05 * (2.0 * phi).sin()),
            _ => IDENTITY,
        },
        Action::Wave => match role {
            // Right arm raised sideways, forearm waving.
            Role::Elbow if side == Side::Right => geometry::rot_z(-amp * 2.2),
            Role::Wrist if side == Side::Right => geometry::rot_z(-amp * (0.9 + 0.6 * phi.sin())),
            Role::Elbow => swing(amp * 0.1 * (0.5 * phi).sin()),
            Role::Spine => geometry::rot_z(amp * 0.05 * (0.5 * phi).sin()),
            Role::Head => geometry::rot_y(amp * 0.2 * (0.5 * phi).sin()),
            _ => IDENTITY,
        },
        Action::Squat => {
            let depth = amp * 0.5 * (1.0 - phi.cos());
            match role {
                Role::Knee => swing(1.1 * depth),
                Role::Ankle => swing(-2.0 * depth),
                Role::Spine => geometry::rot_x(0.45 * depth),
                Role::Elbow => swing(1.2 * depth + amp * 0.1),
                Role::Wrist => swing(0.3 * depth),
                Role::Head => geometry::rot_x(-0.3 * depth),
                _ => IDENTITY,
            }
        }
        Action::IdleSway => match role {
            Role::Spine => geometry::mat_mul(
                &geometry::rot_z(amp * 0.08 * phi.sin()),
                &geometry::rot_x(amp * 0.04 * (0.5 * phi + 1.0).sin()),
            ),
            Role::Elbow => swing(amp * 0.12 * (phi + s).sin()),
            Role::Wrist => swing(amp * 0.2),
            Role::Knee => swing(amp * 0.05 * (phi + s).sin()),
            Role::Ankle => swing(-amp * 0.05 * (phi + s).sin()),
            Role::Head => geometry::rot_y(amp * 0.15 * (0.7 * phi).sin()),
            _ => IDENTITY,
        },
    }
}

/// Forward kinematics for one frame, body frame, root at the origin.
fn body_pose(
    layout: &SkeletonLayout,
    order: &[usize],
    dirs: &[Vec3],
    roles: &[(Role, Side)],
    action: Action,
    phi: f64,
    amp: f64,
) -> Vec<Vec3> {
    let j = layout.joint_count;
    let mut pos = vec![[0.0; 3]; j];
    let mut rot = vec![IDENTITY; j];
    for &i in order {
        let Some(p) = layout.parent_of(i) else {
            continue;
        };
        let (role, side) = roles[i];
        rot[i] = geometry::mat_mul(&rot[p], &local_rotation(action, role, side, phi, amp));
        let offset = geometry::scale(&geometry::mat_vec(&rot[i], &dirs[i]), layout.bone_lengths_mm[i]);
        pos[i] = geometry::add(&pos[p], &offset);
    }
    pos
}

/// Body frame with heading `yaw` to camera axes.
fn to_camera(p: &Vec3, yaw: f64) -> Vec3 {
    let r = geometry::mat_vec(&geometry::rot_y(yaw), p);
    [r[0], -r[1], r[2]]
}

pub fn generate_motion(
    layout: &SkeletonLayout,
    config: &MotionConfig,
    rng: &mut SeededRng,
) -> Result<Motion> {
    layout.validate()?;
    config.validate()?;
    let order = layout.topological_order();
    let dirs = rest_directions(layout);
    let roles: Vec<(Role, Side)> = layout.joint_names.iter().map(|n| classify(n)).collect();
    let root = layout.root();
    let heading0 = rng.uniform_range(0.0, TAU);
    let phase0 = rng.uniform_range(0.0, TAU);

    let rest = body_pose(layout, &order, &dirs, &roles, config.action, 0.0, 0.0);
    let rest_height = -rest.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);

    let t_len = config.duration_frames;
    let jc = layout.joint_count;
    let mut data = Vec::with_capacity(t_len * jc * 3);
    let mut positions = Vec::with_capacity(t_len);
    let omega = config.drift_speed_mm_per_frame / DRIFT_RADIUS_MM;
    for t in 0..t_len {
        let phi = phase0 + TAU * t as f64 / config.gait_period_frames;
        let body = body_pose(layout, &order, &dirs, &roles, config.action, phi, config.amplitude_scale);
        // Travel counter-clockwise (seen from above) on a circle, facing along the path.
        let angle = omega * t as f64;
        let yaw = heading0 + angle;
        let height = -body.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let centre_offset = if omega > 0.0 {
            let a = heading0 - PI / 2.0 + angle;
            [DRIFT_RADIUS_MM * a.cos(), 0.0, -DRIFT_RADIUS_MM * a.sin()]
        } else {
            [0.0; 3]
        };
        let root_body = body[root];
        for p in &body {
            let rel = geometry::sub(p, &root_body);
            data.extend_from_slice(&to_camera(&rel, yaw));
        }
        // Lowest joint rests on the ground plane; at rest the root sits at Y = 0.
        positions.push([centre_offset[0], rest_height - height, centre_offset[2]]);
    }
    Ok(Motion {
        pose: PoseSequence3D::new(t_len, jc, data)?,
        root: RootTrajectory { positions },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn bone_lengths_preserved() {
        let layout = SkeletonLayout::h36m16();
        for action in Action::ALL {
            let cfg = MotionConfig {
                action,
                duration_frames: 120,
                drift_speed_mm_per_frame: 10.0,
                ..Default::default()
            };
            let m = generate_motion(&layout, &cfg, &mut SeededRng::new(1, 0)).unwrap();
            for t in 0..cfg.duration_frames {
                for j in 0..16 {
                    if let Some(p) = layout.parent_of(j) {
                        let d = dist(&m.pose.get(t, j), &m.pose.get(t, p));
                        let want = layout.bone_lengths_mm[j];
                        assert!(((d - want) / want).abs() < 1e-6, "{action:?} t={t} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_amplitude_is_rest_pose() {
        let layout = SkeletonLayout::h36m16();
        for action in Action::ALL {
            let cfg = MotionConfig {
                action,
                amplitude_scale: 0.0,
                duration_frames: 30,
                ..Default::default()
            };
            let m = generate_motion(&layout, &cfg, &mut SeededRng::new(2, 0)).unwrap();
            for t in 1..30 {
                assert_eq!(m.pose.frame(t), m.pose.frame(0));
            }
        }
    }

    #[test]
    fn walk_is_periodic() {
        let layout = SkeletonLayout::h36m16();
        let cfg = MotionConfig {
            action: Action::Walk,
            gait_period_frames: 30.0,
            duration_frames: 90,
            ..Default::default()
        };
        let m = generate_motion(&layout, &cfg, &mut SeededRng::new(3, 0)).unwrap();
        for t in 0..60 {
            for j in 1..16 {
                assert!(dist(&m.pose.get(t, j), &m.pose.get(t + 30, j)) < 1.0);
            }
        }
    }

    #[test]
    fn motion_is_continuous() {
        let layout = SkeletonLayout::h36m16();
        for action in Action::ALL {
            let cfg = MotionConfig {
                action,
                duration_frames: 200,
                ..Default::default()
            };
            let m = generate_motion(&layout, &cfg, &mut SeededRng::new(4, 0)).unwrap();
            for t in 1..200 {
                for j in 0..16 {
                    assert!(dist(&m.pose.get(t, j), &m.pose.get(t - 1, j)) < 100.0);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let layout = SkeletonLayout::h36m16();
        let cfg = MotionConfig::default();
        let a = generate_motion(&layout, &cfg, &mut SeededRng::new(5, 1)).unwrap();
        let b = generate_motion(&layout, &cfg, &mut SeededRng::new(5, 1)).unwrap();
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.root, b.root);
    }

    #[test]
    fn root_is_origin() {
        let layout = SkeletonLayout::h36m16();
        let m = generate_motion(&layout, &MotionConfig::default(), &mut SeededRng::new(6, 0)).unwrap();
        for t in 0..m.pose.frames {
            assert_eq!(m.pose.get(t, 0), [0.0; 3]);
        }
    }
}
