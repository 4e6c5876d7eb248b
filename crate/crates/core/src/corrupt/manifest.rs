use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionOperator {
    GaussianNoise,
    ImpulseNoise,
    TemporalPatchErase,
    GuidedPatchErase,
    Cropping,
    MotionBlur,
    None,
}

impl CorruptionOperator {
    /// The six corruption operators, in report column order.
    pub const ALL: [CorruptionOperator; 6] = [
        CorruptionOperator::GaussianNoise,
        CorruptionOperator::ImpulseNoise,
        CorruptionOperator::TemporalPatchErase,
        CorruptionOperator::GuidedPatchErase,
        CorruptionOperator::Cropping,
        CorruptionOperator::MotionBlur,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GaussianNoise => "gaussian_noise",
            Self::ImpulseNoise => "impulse_noise",
            Self::TemporalPatchErase => "temporal_patch_erase",
            Self::GuidedPatchErase => "guided_patch_erase",
            Self::Cropping => "cropping",
            Self::MotionBlur => "motion_blur",
            Self::None => "none",
        }
    }

    /// Column heading used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Self::GaussianNoise => "Gaussian",
            Self::ImpulseNoise => "Impulse",
            Self::TemporalPatchErase => "Temporal-patch",
            Self::GuidedPatchErase => "Guided-patch",
            Self::Cropping => "Cropping",
            Self::MotionBlur => "Motion Blur",
            Self::None => "Clean",
        }
    }

    pub fn is_pixel_noise(self) -> bool {
        matches!(self, Self::GaussianNoise | Self::ImpulseNoise)
    }
}

impl fmt::Display for CorruptionOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .chain(std::iter::once(&Self::None))
            .copied()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| validation(format!("unknown corruption operator '{s}'")))
    }
}

/// Inclusive pixel rectangle `(x0, y0, x1, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct Rect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl From<[i32; 4]> for Rect {
    fn from(v: [i32; 4]) -> Self {
        Rect {
            x0: v[0],
            y0: v[1],
            x1: v[2],
            y1: v[3],
        }
    }
}

impl From<Rect> for [i32; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= f64::from(self.x0)
            && x <= f64::from(self.x1)
            && y >= f64::from(self.y0)
            && y <= f64::from(self.y1)
    }

    pub fn area(&self) -> i64 {
        if self.x1 < self.x0 || self.y1 < self.y0 {
            0
        } else {
            i64::from(self.x1 - self.x0 + 1) * i64::from(self.y1 - self.y0 + 1)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameCorruption {
    #[serde(default)]
    pub erased_rects: Vec<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_line_px: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_delta: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionManifest {
    pub operator: CorruptionOperator,
    pub severity: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub per_frame: Vec<FrameCorruption>,
}

impl CorruptionManifest {
    pub fn clean(frames: usize, width_px: u32, height_px: u32) -> Self {
        Self {
            operator: CorruptionOperator::None,
            severity: 0.0,
            width_px,
            height_px,
            per_frame: vec![FrameCorruption::default(); frames],
        }
    }

    pub fn frames(&self) -> usize {
        self.per_frame.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width_px as i32, self.height_px as i32);
        for (t, f) in self.per_frame.iter().enumerate() {
            for r in &f.erased_rects {
                if r.x0 < 0 || r.y0 < 0 || r.x1 >= w || r.y1 >= h || r.x1 < r.x0 || r.y1 < r.y0 {
                    return Err(validation(format!(
                        "frame {t}: rectangle {:?} outside {w}x{h} frame",
                        <[i32; 4]>::from(*r)
                    )));
                }
            }
            if let Some(c) = f.crop_line_px {
                if c > self.height_px {
                    return Err(validation(format!(
                        "frame {t}: crop line {c} beyond frame height {h}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether the pixel position `(x, y)` of a joint is hidden in frame `t`.
    pub fn occludes(&self, t: usize, x: f64, y: f64) -> bool {
        let f = &self.per_frame[t];
        f.erased_rects.iter().any(|r| r.contains(x, y))
            || f.crop_line_px.is_some_and(|c| y > f64::from(c))
    }
}
