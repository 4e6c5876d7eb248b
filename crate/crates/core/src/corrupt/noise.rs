//! Pixel-level noise operators.

use crate::corrupt::frame::FrameBuffer;
use crate::rng::SeededRng;

pub const GAUSSIAN_SIGMA: f64 = 0.38;
pub const IMPULSE_RATIO: f64 = 0.27;

/// `len` i.i.d. draws of `N(0, sigma^2)`; the additive field used by
/// [`gaussian_noise`] for the same rng stream.
pub fn gaussian_field(len: usize, sigma: f64, rng: &mut SeededRng) -> Vec<f64> {
    (0..len).map(|_| rng.normal() * sigma).collect()
}

pub fn gaussian_noise(frame: &FrameBuffer, sigma: f64, rng: &mut SeededRng) -> FrameBuffer {
    let noise = gaussian_field(frame.pixels.len(), sigma.max(0.0), rng);
    let pixels = frame
        .pixels
        .iter()
        .zip(&noise)
        .map(|(&v, &n)| (f64::from(v) + n).clamp(0.0, 1.0) as f32)
        .collect();
    FrameBuffer {
        pixels,
        ..frame.clone()
    }
}

/// Number of pixel positions hit by impulse noise at `ratio`.
pub fn impulse_count(ratio: f64, width_px: u32, height_px: u32) -> usize {
    let total = width_px as usize * height_px as usize;
    ((ratio.clamp(0.0, 1.0) * total as f64).floor() as usize).min(total)
}

/// Salt-and-pepper noise on exactly `floor(ratio * H * W)` distinct pixel
/// positions; each channel of a hit pixel becomes 0 or 1 with equal odds.
pub fn impulse_noise(frame: &FrameBuffer, ratio: f64, rng: &mut SeededRng) -> FrameBuffer {
    let mut out = frame.clone();
    let n = impulse_count(ratio, frame.width_px, frame.height_px);
    for pos in rng.sample_indices(frame.pixel_count(), n) {
        for c in 0..3 {
            out.pixels[pos * 3 + c] = if rng.bernoulli(0.5) { 1.0 } else { 0.0 };
        }
    }
    out
}
