//! Temporal additive Gaussian noise on 2D keypoint sequences, and the
//! temporal median filter used as a denoising baseline.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::pose::PoseSequence2D;
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TagnConfig {
    /// Fraction of frames perturbed.
    pub temporal_ratio_k: f64,
    /// Fraction of joints perturbed within each selected frame.
    pub joint_ratio_p: f64,
    /// Noise standard deviation in normalized coordinates.
    pub sigma: f64,
    /// Noise realization index; mixed into the augmentation stream.
    pub seed: u64,
    /// Re-draw the augmentation every epoch instead of once up front.
    pub per_epoch: bool,
}

impl Default for TagnConfig {
    fn default() -> Self {
        Self {
            temporal_ratio_k: 0.5,
            joint_ratio_p: 0.5,
            sigma: 0.3,
            seed: 0,
            per_epoch: false,
        }
    }
}

impl TagnConfig {
    pub fn new(sigma: f64, p: f64, k: f64) -> Self {
        Self {
            temporal_ratio_k: k,
            joint_ratio_p: p,
            sigma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.temporal_ratio_k) {
            return Err(validation("tagn.temporal_ratio_k must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.joint_ratio_p) {
            return Err(validation("tagn.joint_ratio_p must lie in [0, 1]"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(validation("tagn.sigma must be non-negative"));
        }
        Ok(())
    }
}

/// `floor(ratio * n)`, tolerant of ratios like 0.3 that are not exact in binary.
pub fn ratio_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 + 1e-9).floor() as usize).min(n)
}

pub fn apply_tagn(seq: &PoseSequence2D, config: &TagnConfig, rng: &mut SeededRng) -> Result<PoseSequence2D> {
    config.validate()?;
    let mut out = seq.clone();
    if config.sigma == 0.0 {
        return Ok(out);
    }
    let n_frames = ratio_count(config.temporal_ratio_k, seq.frames);
    let n_joints = ratio_count(config.joint_ratio_p, seq.joints);
    for t in rng.sample_indices(seq.frames, n_frames) {
        for j in rng.sample_indices(seq.joints, n_joints) {
            let [x, y] = out.get(t, j);
            let (dx, dy) = (rng.normal() * config.sigma, rng.normal() * config.sigma);
            out.set(t, j, [x + dx, y + dy]);
        }
    }
    Ok(out)
}

/// Per joint and axis, the median over a centred window of `kernel` frames,
/// replicating the first and last frames at the edges.
pub fn median_filter_denoise(seq: &PoseSequence2D, kernel: usize) -> Result<PoseSequence2D> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(validation(format!("median filter kernel must be odd and >= 1, got {kernel}")));
    }
    let half = (kernel / 2) as i64;
    let last = seq.frames as i64 - 1;
    let mut out = seq.clone();
    let mut window = Vec::with_capacity(kernel);
    for j in 0..seq.joints {
        for axis in 0..2 {
            for t in 0..seq.frames as i64 {
                window.clear();
                for dt in -half..=half {
                    let s = (t + dt).clamp(0, last) as usize;
                    window.push(seq.get(s, j)[axis]);
                }
                window.sort_by(f64::total_cmp);
                out.data[(t as usize * seq.joints + j) * 2 + axis] = window[half as usize];
            }
        }
    }
    Ok(out)
}
