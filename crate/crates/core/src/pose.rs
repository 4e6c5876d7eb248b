//! Keypoint, confidence and 3D pose sequences.
//!
//! 2D keypoints are normalized by frame width: pixel `(u, v)` maps to
//! `((2u - W) / W, (2v - H) / W)`, so the horizontal extent is `[-1, 1]` and
//! both axes share one scale.

use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Result};
use crate::skeleton::SkeletonLayout;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSequence2D {
    pub frames: usize,
    pub joints: usize,
    /// Row-major `frames x joints x 2`.
    pub data: Vec<f64>,
    pub width_px: u32,
    pub height_px: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSequence {
    pub frames: usize,
    pub joints: usize,
    /// Row-major `frames x joints`, each in `[0, 1]`.
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSequence3D {
    pub frames: usize,
    pub joints: usize,
    /// Row-major `frames x joints x 3`, millimetres, root-relative.
    pub data: Vec<f64>,
}

fn check_len(what: &str, got: usize, frames: usize, joints: usize, per: usize) -> Result<()> {
    if got != frames * joints * per {
        return Err(shape(format!(
            "{what}: expected {frames}x{joints}x{per} = {} values, got {got}",
            frames * joints * per
        )));
    }
    Ok(())
}

impl PoseSequence2D {
    pub fn new(
        frames: usize,
        joints: usize,
        data: Vec<f64>,
        width_px: u32,
        height_px: u32,
    ) -> Result<Self> {
        check_len("PoseSequence2D", data.len(), frames, joints, 2)?;
        if width_px == 0 || height_px == 0 {
            return Err(validation("frame size must be positive"));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(validation(format!(
                "non-finite 2D keypoint at frame {}, joint {}",
                i / (2 * joints),
                (i / 2) % joints
            )));
        }
        Ok(Self {
            frames,
            joints,
            data,
            width_px,
            height_px,
        })
    }

    pub fn get(&self, t: usize, j: usize) -> [f64; 2] {
        let i = (t * self.joints + j) * 2;
        [self.data[i], self.data[i + 1]]
    }

    pub fn set(&mut self, t: usize, j: usize, p: [f64; 2]) {
        let i = (t * self.joints + j) * 2;
        self.data[i] = p[0];
        self.data[i + 1] = p[1];
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.joints * 2..(t + 1) * self.joints * 2]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.frames == other.frames && self.joints == other.joints
    }

    /// Back to pixel coordinates, `frames x joints x 2`.
    pub fn to_pixels(&self) -> Vec<f64> {
        denormalize_2d(&self.data, self.width_px, self.height_px)
    }

    pub fn pixel(&self, t: usize, j: usize) -> [f64; 2] {
        let [x, y] = self.get(t, j);
        let (w, h) = (f64::from(self.width_px), f64::from(self.height_px));
        [(x * w + w) / 2.0, (y * w + h) / 2.0]
    }

    /// Copy with every value rounded to the nearest `f32`.
    pub fn quantized(&self) -> Self {
        Self {
            data: quantize(&self.data),
            ..self.clone()
        }
    }
}

impl ConfidenceSequence {
    pub fn new(frames: usize, joints: usize, scores: Vec<f64>) -> Result<Self> {
        check_len("ConfidenceSequence", scores.len(), frames, joints, 1)?;
        if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(validation(format!(
                "confidence {} out of [0, 1] at frame {}, joint {}",
                scores[i],
                i / joints,
                i % joints
            )));
        }
        Ok(Self {
            frames,
            joints,
            scores,
        })
    }

    pub fn ones(frames: usize, joints: usize) -> Self {
        Self {
            frames,
            joints,
            scores: vec![1.0; frames * joints],
        }
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.scores[t * self.joints + j]
    }

    pub fn quantized(&self) -> Self {
        Self {
            scores: quantize(&self.scores),
            ..self.clone()
        }
    }
}

impl PoseSequence3D {
    pub fn new(frames: usize, joints: usize, data: Vec<f64>) -> Result<Self> {
        check_len("PoseSequence3D", data.len(), frames, joints, 3)?;
        Ok(Self {
            frames,
            joints,
            data,
        })
    }

    pub fn get(&self, t: usize, j: usize) -> [f64; 3] {
        let i = (t * self.joints + j) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.joints * 3..(t + 1) * self.joints * 3]
    }

    pub fn quantized(&self) -> Self {
        Self {
            data: quantize(&self.data),
            ..self.clone()
        }
    }
}

pub(crate) fn quantize(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| f64::from(v as f32)).collect()
}

/// Normalizes `frames x joints x 2` pixel coordinates.
pub fn normalize_2d(
    pixels: &[f64],
    frames: usize,
    joints: usize,
    width_px: u32,
    height_px: u32,
) -> Result<PoseSequence2D> {
    if width_px == 0 || height_px == 0 {
        return Err(validation(format!(
            "frame size must be positive, got {width_px}x{height_px}"
        )));
    }
    check_len("pixel keypoints", pixels.len(), frames, joints, 2)?;
    let (w, h) = (f64::from(width_px), f64::from(height_px));
    let mut data = Vec::with_capacity(pixels.len());
    for (i, uv) in pixels.chunks_exact(2).enumerate() {
        if !(uv[0].is_finite() && uv[1].is_finite()) {
            return Err(validation(format!(
                "non-finite pixel coordinate at frame {}, joint {}",
                i / joints,
                i % joints
            )));
        }
        data.push((2.0 * uv[0] - w) / w);
        data.push((2.0 * uv[1] - h) / w);
    }
    Ok(PoseSequence2D {
        frames,
        joints,
        data,
        width_px,
        height_px,
    })
}

/// Inverse of [`normalize_2d`] on a raw coordinate buffer.
pub fn denormalize_2d(normalized: &[f64], width_px: u32, height_px: u32) -> Vec<f64> {
    let (w, h) = (f64::from(width_px), f64::from(height_px));
    normalized
        .chunks_exact(2)
        .flat_map(|xy| [(xy[0] * w + w) / 2.0, (xy[1] * w + h) / 2.0])
        .collect()
}

/// Subtracts the root joint from every joint, per frame.
pub fn root_center_3d(
    raw: &[f64],
    frames: usize,
    layout: &SkeletonLayout,
) -> Result<PoseSequence3D> {
    layout.validate()?;
    let joints = layout.joint_count;
    check_len("raw 3D poses", raw.len(), frames, joints, 3)?;
    let root = layout.root();
    let mut data = raw.to_vec();
    for frame in data.chunks_exact_mut(joints * 3) {
        let r = [frame[root * 3], frame[root * 3 + 1], frame[root * 3 + 2]];
        for p in frame.chunks_exact_mut(3) {
            p[0] -= r[0];
            p[1] -= r[1];
            p[2] -= r[2];
        }
    }
    Ok(PoseSequence3D {
        frames,
        joints,
        data,
    })
}
