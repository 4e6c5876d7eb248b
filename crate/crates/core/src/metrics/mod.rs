//! Pose error metrics and the corruption-aware evaluation protocol.

pub mod inclusion;
pub mod procrustes;
pub mod report;

pub use inclusion::{displacement, error_histogram, inclusion_fraction_curve, inclusion_mask, Histogram, InclusionMask};
pub use procrustes::procrustes_align;
pub use report::{evaluate, evaluate_predictions, EvalOptions, EvalReport, EvalRow};

use crate::error::{shape, Error, Result};
use crate::geometry::Vec3;
use crate::pose::PoseSequence3D;

fn check_shapes(pred: &PoseSequence3D, gt: &PoseSequence3D, mask: Option<&InclusionMask>) -> Result<()> {
    if pred.frames != gt.frames || pred.joints != gt.joints {
        return Err(shape(format!(
            "prediction {}x{} and ground truth {}x{} differ in shape",
            pred.frames, pred.joints, gt.frames, gt.joints
        )));
    }
    if let Some(m) = mask {
        if m.frames != gt.frames || m.joints != gt.joints {
            return Err(shape("inclusion mask does not match the pose sequences"));
        }
    }
    Ok(())
}

fn points(frame: &[f64]) -> Vec<Vec3> {
    frame.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect()
}

/// Euclidean error of every (frame, joint).
pub fn joint_errors(pred: &PoseSequence3D, gt: &PoseSequence3D) -> Result<Vec<f64>> {
    check_shapes(pred, gt, None)?;
    Ok(pred
        .data
        .chunks_exact(3)
        .zip(gt.data.chunks_exact(3))
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
        .collect())
}

/// Euclidean error of every (frame, joint) after aligning each frame by
/// similarity Procrustes. Frames rejected by `keep` are left at zero.
pub fn aligned_joint_errors(
    pred: &PoseSequence3D,
    gt: &PoseSequence3D,
    keep: impl Fn(usize) -> bool,
) -> Result<Vec<f64>> {
    check_shapes(pred, gt, None)?;
    let j = gt.joints;
    let mut out = vec![0.0; gt.frames * j];
    for t in (0..gt.frames).filter(|t| keep(*t)) {
        let g = points(gt.frame(t));
        let aligned = procrustes_align(&points(pred.frame(t)), &g)?;
        for (jj, (a, b)) in aligned.iter().zip(&g).enumerate() {
            out[t * j + jj] = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        }
    }
    Ok(out)
}

fn masked_mean(errors: &[f64], mask: Option<&InclusionMask>) -> Result<f64> {
    let (sum, n) = match mask {
        None => (errors.iter().sum::<f64>(), errors.len()),
        Some(m) => errors
            .iter()
            .zip(&m.mask)
            .filter(|(_, keep)| **keep)
            .fold((0.0, 0), |(s, n), (e, _)| (s + e, n + 1)),
    };
    if n == 0 {
        return Err(Error::Degenerate("no joints included".into()));
    }
    Ok(sum / n as f64)
}

/// Mean per-joint position error over the included joints.
pub fn mpjpe(pred: &PoseSequence3D, gt: &PoseSequence3D, mask: Option<&InclusionMask>) -> Result<f64> {
    check_shapes(pred, gt, mask)?;
    masked_mean(&joint_errors(pred, gt)?, mask)
}

/// MPJPE after per-frame similarity alignment of the whole pose.
pub fn p_mpjpe(pred: &PoseSequence3D, gt: &PoseSequence3D, mask: Option<&InclusionMask>) -> Result<f64> {
    check_shapes(pred, gt, mask)?;
    let keep = |t: usize| mask.is_none_or(|m| (0..m.joints).any(|j| m.get(t, j)));
    masked_mean(&aligned_joint_errors(pred, gt, keep)?, mask)
}
