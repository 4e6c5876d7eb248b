//! Directional motion blur.
//!
//! The kernel is a line of single-pixel lobes through the origin along
//! `theta`, one lobe per pixel step on the dominant axis, spanning
//! `-L..=L` with `L = 2 * max(dx, dy)`. Lobe weights follow an axis-aligned
//! Gaussian with standard deviations `(dx, dy)` and are normalized to sum 1.

use crate::corrupt::frame::FrameBuffer;
use crate::error::{validation, Result};

pub const DEFAULT_DELTA: (f64, f64) = (20.0, 15.0);

#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel {
    /// `(dx, dy, weight)` taps, centre tap first.
    pub taps: Vec<(i64, i64, f64)>,
    pub half_extent: i64,
}

impl BlurKernel {
    pub fn new(theta_rad: f64, delta: (f64, f64)) -> Result<Self> {
        let (sx, sy) = delta;
        if !(sx > 0.0 && sy > 0.0) {
            return Err(validation(format!("blur delta must be positive, got ({sx}, {sy})")));
        }
        let half = (2.0 * sx.max(sy)).round() as i64;
        let (c, s) = (theta_rad.cos(), theta_rad.sin());
        let step = c.abs().max(s.abs());
        let (ux, uy) = (c / step, s / step);
        let mut taps = Vec::with_capacity(2 * half as usize + 1);
        let order = std::iter::once(0).chain((1..=half).flat_map(|k| [k, -k]));
        for k in order {
            let (px, py) = (k as f64 * ux, k as f64 * uy);
            let w = (-0.5 * ((px / sx).powi(2) + (py / sy).powi(2))).exp();
            taps.push((px.round() as i64, py.round() as i64, w));
        }
        let total: f64 = taps.iter().map(|t| t.2).sum();
        for t in &mut taps {
            t.2 /= total;
        }
        Ok(Self {
            taps,
            half_extent: half,
        })
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().map(|t| t.2).sum()
    }

    /// Side length of the square support.
    pub fn size(&self) -> usize {
        2 * self.half_extent as usize + 1
    }

    /// Weight at offset `(dx, dy)`, zero off the support.
    pub fn weight(&self, dx: i64, dy: i64) -> f64 {
        self.taps
            .iter()
            .filter(|t| t.0 == dx && t.1 == dy)
            .map(|t| t.2)
            .sum()
    }
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * (n - 1);
    if period == 0 {
        return 0;
    }
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

pub fn motion_blur(frame: &FrameBuffer, theta_rad: f64, delta: (f64, f64)) -> Result<FrameBuffer> {
    let kernel = BlurKernel::new(theta_rad, delta)?;
    if kernel.size() > frame.width() || kernel.size() > frame.height() {
        return Err(validation(format!(
            "blur kernel of size {} exceeds {}x{} frame",
            kernel.size(),
            frame.width_px,
            frame.height_px
        )));
    }
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let mut acc = vec![0.0f64; frame.pixels.len()];
    // out(p) = sum_q k(q) in(p - q)
    for &(dx, dy, wt) in &kernel.taps {
        for y in 0..h {
            let sy = reflect(y - dy, h);
            let row_out = (y * w) as usize * 3;
            let row_in = sy * w as usize * 3;
            for x in 0..w {
                let sx = reflect(x - dx, w);
                let o = row_out + x as usize * 3;
                let i = row_in + sx * 3;
                acc[o] += wt * f64::from(frame.pixels[i]);
                acc[o + 1] += wt * f64::from(frame.pixels[i + 1]);
                acc[o + 2] += wt * f64::from(frame.pixels[i + 2]);
            }
        }
    }
    Ok(FrameBuffer {
        pixels: acc.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
        ..frame.clone()
    })
}
