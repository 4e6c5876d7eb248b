use crate::corrupt::frame::{FrameBuffer, PixelTrack};
use crate::corrupt::manifest::{CorruptionManifest, CorruptionOperator, FrameCorruption};
use crate::error::{validation, Error, Result};

pub const MIN_CROP_ROWS: f64 = 8.0;

/// Cut-off row: mean keypoint height over the clip, capped at two thirds of
/// the frame height.
pub fn crop_line(track: &PixelTrack, height_px: u32) -> f64 {
    let n = (track.frames * track.joints) as f64;
    let y_avg = track.data.iter().skip(1).step_by(2).sum::<f64>() / n;
    y_avg.min(2.0 * f64::from(height_px) / 3.0)
}

pub fn plan_crop(track: &PixelTrack, width_px: u32, height_px: u32) -> Result<CorruptionManifest> {
    if track.frames == 0 || track.joints == 0 {
        return Err(validation("cropping needs at least one keypoint"));
    }
    let c = crop_line(track, height_px);
    if !(c >= MIN_CROP_ROWS) {
        return Err(Error::Degenerate(format!(
            "degenerate crop: cut-off at row {c:.2} keeps fewer than {MIN_CROP_ROWS} rows"
        )));
    }
    let line = c.floor() as u32;
    Ok(CorruptionManifest {
        operator: CorruptionOperator::Cropping,
        severity: 1.0,
        width_px,
        height_px,
        per_frame: vec![
            FrameCorruption {
                crop_line_px: Some(line),
                ..Default::default()
            };
            track.frames
        ],
    })
}

/// Keeps rows `0..line` and stretches them back to full height by
/// nearest-neighbour row selection.
pub fn crop_and_resize(frame: &FrameBuffer, line: u32) -> FrameBuffer {
    let (w, h) = (frame.width(), frame.height());
    let kept = (line as usize).clamp(1, h);
    let mut out = frame.clone();
    let row = w * 3;
    for y in 0..h {
        let src = y * kept / h;
        out.pixels[y * row..(y + 1) * row].copy_from_slice(&frame.pixels[src * row..(src + 1) * row]);
    }
    out
}

pub fn crop_horizontal(
    video: &[FrameBuffer],
    track: &PixelTrack,
) -> Result<(Vec<FrameBuffer>, CorruptionManifest)> {
    if video.is_empty() {
        return Err(validation("empty video"));
    }
    let m = plan_crop(track, video[0].width_px, video[0].height_px)?;
    let frames = video
        .iter()
        .zip(&m.per_frame)
        .map(|(f, c)| crop_and_resize(f, c.crop_line_px.expect("crop manifest")))
        .collect();
    Ok((frames, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_track(y: f64, frames: usize) -> PixelTrack {
        PixelTrack::new(frames, 4, [100.0, y].repeat(frames * 4)).unwrap()
    }

    #[test]
    fn centred_keypoints_cut_at_half_height() {
        assert_eq!(crop_line(&flat_track(450.0, 3), 900), 450.0);
    }

    #[test]
    fn low_keypoints_capped_at_two_thirds() {
        assert_eq!(crop_line(&flat_track(810.0, 3), 900), 600.0);
        let m = plan_crop(&flat_track(810.0, 3), 1200, 900).unwrap();
        assert!(m.per_frame.iter().all(|f| f.crop_line_px == Some(600)));
    }

    #[test]
    fn degenerate_crop_rejected() {
        assert!(matches!(plan_crop(&flat_track(3.0, 2), 100, 100), Err(Error::Degenerate(_))));
    }

    #[test]
    fn resize_repeats_kept_rows() {
        let mut f = FrameBuffer::filled(2, 4, 0.0);
        for y in 0..4 {
            f.set(0, y, [y as f32 / 4.0; 3]);
            f.set(1, y, [y as f32 / 4.0; 3]);
        }
        let out = crop_and_resize(&f, 2);
        let col: Vec<f32> = (0..4).map(|y| out.get(0, y)[0]).collect();
        assert_eq!(col, vec![0.0, 0.0, 0.25, 0.25]);
    }
}
