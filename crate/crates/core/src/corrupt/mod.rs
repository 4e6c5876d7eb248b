//! Video corruption operators and corrupted-split construction.
//!
//! Each operator is split into a planning step, which draws the corruption
//! parameters and records them in a [`CorruptionManifest`], and a rendering
//! step that applies a manifest to pixels. Detector simulation only needs the
//! plan, so splits can be built without touching pixels.

pub mod blur;
pub mod crop;
pub mod erase;
pub mod frame;
pub mod kmeans;
pub mod manifest;
pub mod noise;
pub mod split;

use std::f64::consts::FRAC_PI_4;

pub use blur::{motion_blur, BlurKernel};
pub use crop::{crop_horizontal, crop_line};
pub use erase::{guided_patch_erase, patch_side, temporal_patch_erase};
pub use frame::{render_skeleton, FrameBuffer, PixelTrack};
pub use kmeans::kmeans;
pub use manifest::{CorruptionManifest, CorruptionOperator, FrameCorruption, Rect};
pub use noise::{gaussian_noise, impulse_noise};
pub use split::{build_corrupted_split, SplitConfig, SplitRole};

use crate::error::{validation, Result};
use crate::rng::SeededRng;

/// Draws the corruption parameters of `op` for one video.
pub fn plan_corruption(
    op: CorruptionOperator,
    track: &PixelTrack,
    width_px: u32,
    height_px: u32,
    rng: &mut SeededRng,
) -> Result<CorruptionManifest> {
    let simple = |operator| CorruptionManifest {
        operator,
        severity: 1.0,
        width_px,
        height_px,
        per_frame: vec![FrameCorruption::default(); track.frames],
    };
    match op {
        CorruptionOperator::GaussianNoise | CorruptionOperator::ImpulseNoise => Ok(simple(op)),
        CorruptionOperator::None => Ok(CorruptionManifest::clean(track.frames, width_px, height_px)),
        CorruptionOperator::GuidedPatchErase => erase::plan_guided_patch_erase(track, width_px, height_px, rng),
        CorruptionOperator::TemporalPatchErase => erase::plan_temporal_patch_erase(track, width_px, height_px, rng),
        CorruptionOperator::Cropping => crop::plan_crop(track, width_px, height_px),
        CorruptionOperator::MotionBlur => {
            let mut m = simple(op);
            for f in &mut m.per_frame {
                f.blur_theta_rad = Some(rng.uniform_range(-FRAC_PI_4, FRAC_PI_4));
                f.blur_delta = Some(blur::DEFAULT_DELTA);
            }
            Ok(m)
        }
    }
}

/// Applies a manifest to clean frames. Noise operators draw frame `t`'s
/// noise from `rng.child_index(t)`.
pub fn render_corruption(
    video: &[FrameBuffer],
    manifest: &CorruptionManifest,
    rng: &SeededRng,
) -> Result<Vec<FrameBuffer>> {
    if video.len() != manifest.frames() {
        return Err(validation(format!(
            "manifest covers {} frames, video has {}",
            manifest.frames(),
            video.len()
        )));
    }
    video
        .iter()
        .zip(&manifest.per_frame)
        .enumerate()
        .map(|(t, (frame, fc))| {
            let mut frng = rng.child_index(t as u64);
            let mut out = match manifest.operator {
                CorruptionOperator::GaussianNoise => {
                    gaussian_noise(frame, noise::GAUSSIAN_SIGMA * manifest.severity, &mut frng)
                }
                CorruptionOperator::ImpulseNoise => {
                    impulse_noise(frame, noise::IMPULSE_RATIO * manifest.severity, &mut frng)
                }
                CorruptionOperator::MotionBlur => motion_blur(
                    frame,
                    fc.blur_theta_rad.unwrap_or(0.0),
                    fc.blur_delta.unwrap_or(blur::DEFAULT_DELTA),
                )?,
                _ => frame.clone(),
            };
            if !fc.erased_rects.is_empty() {
                out = erase::erase_rects(&out, &fc.erased_rects);
            }
            if let Some(line) = fc.crop_line_px {
                out = crop::crop_and_resize(&out, line);
            }
            Ok(out)
        })
        .collect()
}

/// Plans and renders `op` on a video with `rng.child("plan")` and
/// `rng.child("render")`.
pub fn corrupt_video(
    op: CorruptionOperator,
    video: &[FrameBuffer],
    track: &PixelTrack,
    rng: &SeededRng,
) -> Result<(Vec<FrameBuffer>, CorruptionManifest)> {
    if video.is_empty() {
        return Err(validation("empty video"));
    }
    let m = plan_corruption(op, track, video[0].width_px, video[0].height_px, &mut rng.child("plan"))?;
    let frames = render_corruption(video, &m, &rng.child("render"))?;
    Ok((frames, m))
}
