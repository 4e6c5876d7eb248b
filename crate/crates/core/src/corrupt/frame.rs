use crate::error::{validation, Result};
use crate::pose::PoseSequence2D;
use crate::skeleton::SkeletonLayout;

/// RGB frame, row-major `height x width x 3`, channel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBuffer {
    pub width_px: u32,
    pub height_px: u32,
    pub pixels: Vec<f32>,
}

impl FrameBuffer {
    pub fn filled(width_px: u32, height_px: u32, value: f32) -> Self {
        Self {
            width_px,
            height_px,
            pixels: vec![value; width_px as usize * height_px as usize * 3],
        }
    }

    pub fn from_pixels(width_px: u32, height_px: u32, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != width_px as usize * height_px as usize * 3 {
            return Err(validation(format!(
                "frame buffer of {width_px}x{height_px} needs {} values, got {}",
                width_px as usize * height_px as usize * 3,
                pixels.len()
            )));
        }
        Ok(Self {
            width_px,
            height_px,
            pixels: pixels.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width_px as usize
    }

    pub fn height(&self) -> usize {
        self.height_px as usize
    }

    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width() + x) * 3
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = self.index(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = self.index(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Binary PPM (P6) encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width_px, self.height_px).into_bytes();
        out.extend(self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }
}

/// Pixel keypoint track, row-major `frames x joints x 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelTrack {
    pub frames: usize,
    pub joints: usize,
    pub data: Vec<f64>,
}

impl PixelTrack {
    pub fn new(frames: usize, joints: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * joints * 2 {
            return Err(validation(format!(
                "pixel track needs {} values, got {}",
                frames * joints * 2,
                data.len()
            )));
        }
        Ok(Self {
            frames,
            joints,
            data,
        })
    }

    pub fn from_pose(seq: &PoseSequence2D) -> Self {
        Self {
            frames: seq.frames,
            joints: seq.joints,
            data: seq.to_pixels(),
        }
    }

    pub fn get(&self, t: usize, j: usize) -> [f64; 2] {
        let i = (t * self.joints + j) * 2;
        [self.data[i], self.data[i + 1]]
    }

    /// Frames `start..end` as a new track.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            frames: end - start,
            joints: self.joints,
            data: self.data[start * self.joints * 2..end * self.joints * 2].to_vec(),
        }
    }
}

fn draw_disk(frame: &mut FrameBuffer, cx: f64, cy: f64, radius: f64, rgb: [f32; 3]) {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let r = radius.ceil() as i64;
    let (ix, iy) = (cx.round() as i64, cy.round() as i64);
    for y in (iy - r).max(0)..=(iy + r).min(h - 1) {
        for x in (ix - r).max(0)..=(ix + r).min(w - 1) {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= radius * radius {
                frame.set(x as usize, y as usize, rgb);
            }
        }
    }
}

/// Draws frame `t` of a keypoint track as a stick figure on a grey backdrop.
pub fn render_skeleton(
    layout: &SkeletonLayout,
    track: &PixelTrack,
    t: usize,
    width_px: u32,
    height_px: u32,
) -> FrameBuffer {
    let mut frame = FrameBuffer::filled(width_px, height_px, 0.55);
    let thickness = (f64::from(width_px.min(height_px)) / 120.0).max(1.0);
    for j in 0..layout.joint_count {
        let Some(p) = layout.parent_of(j) else {
            continue;
        };
        let (a, b) = (track.get(t, p), track.get(t, j));
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let steps = (len / (thickness * 0.5)).ceil().max(1.0) as usize;
        let shade = 0.15 + 0.7 * (j as f32 / layout.joint_count as f32);
        for s in 0..=steps {
            let u = s as f64 / steps as f64;
            draw_disk(
                &mut frame,
                a[0] + u * (b[0] - a[0]),
                a[1] + u * (b[1] - a[1]),
                thickness,
                [shade, 0.2, 1.0 - shade],
            );
        }
    }
    for j in 0..layout.joint_count {
        let [x, y] = track.get(t, j);
        draw_disk(&mut frame, x, y, thickness * 1.6, [1.0, 0.95, 0.3]);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_size() {
        let f = FrameBuffer::filled(4, 3, 1.0);
        let ppm = f.to_ppm();
        assert!(ppm.starts_with(b"P6\n4 3\n255\n"));
        assert_eq!(ppm.len(), 11 + 4 * 3 * 3);
        assert!(ppm[11..].iter().all(|&b| b == 255));
    }

    #[test]
    fn from_pixels_clamps() {
        let f = FrameBuffer::from_pixels(1, 1, vec![-1.0, 0.5, 2.0]).unwrap();
        assert_eq!(f.pixels, vec![0.0, 0.5, 1.0]);
    }
}
