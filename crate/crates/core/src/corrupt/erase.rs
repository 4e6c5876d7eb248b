//! Guided and temporal patch erasing.
//!
//! Patch centres are k-means centroids of the trajectories of a random half
//! of the joints, so squares land where the body spends most of its time.

use crate::corrupt::frame::{FrameBuffer, PixelTrack};
use crate::corrupt::kmeans::{kmeans, DEFAULT_ITERS};
use crate::corrupt::manifest::{CorruptionManifest, CorruptionOperator, FrameCorruption, Rect};
use crate::error::{validation, Result};
use crate::rng::SeededRng;

/// Fraction of joints whose trajectories guide the patch placement.
pub const TRACKED_JOINT_FRACTION: f64 = 0.5;
pub const MAX_PARTITIONS: usize = 10;

/// Side length of the erased squares.
pub fn patch_side(width_px: u32, height_px: u32) -> u32 {
    width_px.min(height_px) / 10
}

/// Square of side `side` around `centre`, clipped to the frame.
pub fn square_at(centre: [f64; 2], side: u32, width_px: u32, height_px: u32) -> Option<Rect> {
    if side == 0 {
        return None;
    }
    let half = (side / 2) as i64;
    let x0 = centre[0].floor() as i64 - half;
    let y0 = centre[1].floor() as i64 - half;
    let (x1, y1) = (x0 + side as i64 - 1, y0 + side as i64 - 1);
    let r = Rect {
        x0: x0.max(0) as i32,
        y0: y0.max(0) as i32,
        x1: x1.min(width_px as i64 - 1) as i32,
        y1: y1.min(height_px as i64 - 1) as i32,
    };
    (r.x0 <= r.x1 && r.y0 <= r.y1).then_some(r)
}

/// Patch rectangles for one clip.
pub fn plan_guided_patches(
    track: &PixelTrack,
    width_px: u32,
    height_px: u32,
    rng: &mut SeededRng,
) -> Result<Vec<Rect>> {
    if track.frames == 0 || track.joints == 0 {
        return Err(validation("guided patch erasing needs a non-empty clip"));
    }
    let k = rng.int_inclusive(2, 4);
    let tracked = ((track.joints as f64 * TRACKED_JOINT_FRACTION).floor() as usize).max(1);
    let joints = rng.sample_indices(track.joints, tracked);
    let points: Vec<[f64; 2]> = (0..track.frames)
        .flat_map(|t| joints.iter().map(move |&j| (t, j)))
        .map(|(t, j)| track.get(t, j))
        .collect();
    let fit = kmeans(&points, k.min(points.len()), DEFAULT_ITERS, rng)?;
    let side = patch_side(width_px, height_px);
    Ok(fit
        .centroids
        .iter()
        .filter_map(|&c| square_at(c, side, width_px, height_px))
        .collect())
}

/// Near-equal contiguous chunk lengths; the remainder goes to the first chunks.
pub fn chunk_lengths(frames: usize, parts: usize) -> Vec<usize> {
    let parts = parts.clamp(1, frames.max(1));
    let (q, r) = (frames / parts, frames % parts);
    (0..parts).map(|i| q + usize::from(i < r)).collect()
}

pub fn plan_guided_patch_erase(
    track: &PixelTrack,
    width_px: u32,
    height_px: u32,
    rng: &mut SeededRng,
) -> Result<CorruptionManifest> {
    let rects = plan_guided_patches(track, width_px, height_px, rng)?;
    Ok(CorruptionManifest {
        operator: CorruptionOperator::GuidedPatchErase,
        severity: 1.0,
        width_px,
        height_px,
        per_frame: vec![
            FrameCorruption {
                erased_rects: rects,
                ..Default::default()
            };
            track.frames
        ],
    })
}

/// Temporal patch erasing with a fixed partition count; chunk `i` is planned
/// with `rng.child_index(i)`.
pub fn plan_temporal_patch_erase_with(
    track: &PixelTrack,
    width_px: u32,
    height_px: u32,
    partitions: usize,
    rng: &SeededRng,
) -> Result<CorruptionManifest> {
    if track.frames == 0 {
        return Err(validation("temporal patch erasing needs at least one frame"));
    }
    let mut per_frame = Vec::with_capacity(track.frames);
    let mut start = 0;
    for (i, len) in chunk_lengths(track.frames, partitions).into_iter().enumerate() {
        let clip = track.slice(start, start + len);
        let rects = plan_guided_patches(&clip, width_px, height_px, &mut rng.child_index(i as u64))?;
        per_frame.extend(std::iter::repeat_n(
            FrameCorruption {
                erased_rects: rects,
                ..Default::default()
            },
            len,
        ));
        start += len;
    }
    Ok(CorruptionManifest {
        operator: CorruptionOperator::TemporalPatchErase,
        severity: 1.0,
        width_px,
        height_px,
        per_frame,
    })
}

pub fn plan_temporal_patch_erase(
    track: &PixelTrack,
    width_px: u32,
    height_px: u32,
    rng: &mut SeededRng,
) -> Result<CorruptionManifest> {
    let partitions = rng.int_inclusive(1, MAX_PARTITIONS);
    plan_temporal_patch_erase_with(track, width_px, height_px, partitions, &rng.child("chunks"))
}

pub fn erase_rects(frame: &FrameBuffer, rects: &[Rect]) -> FrameBuffer {
    let mut out = frame.clone();
    for r in rects {
        for y in r.y0.max(0) as usize..=(r.y1 as usize).min(frame.height() - 1) {
            for x in r.x0.max(0) as usize..=(r.x1 as usize).min(frame.width() - 1) {
                out.set(x, y, [0.0; 3]);
            }
        }
    }
    out
}

fn check_video(video: &[FrameBuffer], track: &PixelTrack) -> Result<()> {
    if video.is_empty() {
        return Err(validation("empty video"));
    }
    if video.len() != track.frames {
        return Err(validation(format!(
            "video has {} frames, keypoints have {}",
            video.len(),
            track.frames
        )));
    }
    Ok(())
}

fn render(video: &[FrameBuffer], m: &CorruptionManifest) -> Vec<FrameBuffer> {
    video
        .iter()
        .zip(&m.per_frame)
        .map(|(f, c)| erase_rects(f, &c.erased_rects))
        .collect()
}

pub fn guided_patch_erase(
    video: &[FrameBuffer],
    track: &PixelTrack,
    rng: &mut SeededRng,
) -> Result<(Vec<FrameBuffer>, CorruptionManifest)> {
    check_video(video, track)?;
    let m = plan_guided_patch_erase(track, video[0].width_px, video[0].height_px, rng)?;
    Ok((render(video, &m), m))
}

pub fn temporal_patch_erase(
    video: &[FrameBuffer],
    track: &PixelTrack,
    rng: &mut SeededRng,
) -> Result<(Vec<FrameBuffer>, CorruptionManifest)> {
    check_video(video, track)?;
    let m = plan_temporal_patch_erase(track, video[0].width_px, video[0].height_px, rng)?;
    Ok((render(video, &m), m))
}

/// Like [`temporal_patch_erase`] but with the partition count fixed.
pub fn temporal_patch_erase_with(
    video: &[FrameBuffer],
    track: &PixelTrack,
    partitions: usize,
    rng: &SeededRng,
) -> Result<(Vec<FrameBuffer>, CorruptionManifest)> {
    check_video(video, track)?;
    let m = plan_temporal_patch_erase_with(track, video[0].width_px, video[0].height_px, partitions, rng)?;
    Ok((render(video, &m), m))
}
