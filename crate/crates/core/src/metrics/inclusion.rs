use serde::Serialize;

use crate::error::{shape, validation, Result};
use crate::pose::PoseSequence2D;

/// Joints whose 2D detection moved by at most `tau` (normalized units) under corruption.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionMask {
    pub frames: usize,
    pub joints: usize,
    pub mask: Vec<bool>,
    pub tau: f64,
    pub included_fraction: f64,
}

impl InclusionMask {
    pub fn all(frames: usize, joints: usize) -> Self {
        Self { frames, joints, mask: vec![true; frames * joints], tau: f64::INFINITY, included_fraction: 1.0 }
    }

    pub fn get(&self, t: usize, j: usize) -> bool {
        self.mask[t * self.joints + j]
    }

    pub fn included(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }
}

fn check_pair(clean: &PoseSequence2D, corrupt: &PoseSequence2D) -> Result<()> {
    if clean.frames != corrupt.frames || clean.joints != corrupt.joints {
        return Err(shape(format!(
            "clean {}x{} and corrupted {}x{} detections differ in shape",
            clean.frames, clean.joints, corrupt.frames, corrupt.joints
        )));
    }
    Ok(())
}

/// Per-frame, per-joint ℓ2 displacement between two detections.
pub fn displacement(clean: &PoseSequence2D, corrupt: &PoseSequence2D) -> Result<Vec<f64>> {
    check_pair(clean, corrupt)?;
    Ok(clean
        .data
        .chunks_exact(2)
        .zip(corrupt.data.chunks_exact(2))
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
        .collect())
}

pub fn inclusion_mask(clean: &PoseSequence2D, corrupt: &PoseSequence2D, tau: f64) -> Result<InclusionMask> {
    let d = displacement(clean, corrupt)?;
    let mask: Vec<bool> = d.iter().map(|e| *e <= tau).collect();
    let included = mask.iter().filter(|m| **m).count();
    Ok(InclusionMask {
        frames: clean.frames,
        joints: clean.joints,
        included_fraction: if mask.is_empty() { 0.0 } else { included as f64 / mask.len() as f64 },
        mask,
        tau,
    })
}

/// Included fraction at each threshold.
pub fn inclusion_fraction_curve(clean: &PoseSequence2D, corrupt: &PoseSequence2D, taus: &[f64]) -> Result<Vec<(f64, f64)>> {
    if taus.is_empty() {
        return Err(validation("inclusion curve needs at least one threshold"));
    }
    let d = displacement(clean, corrupt)?;
    let n = d.len().max(1) as f64;
    Ok(taus.iter().map(|&tau| (tau, d.iter().filter(|e| **e <= tau).count() as f64 / n)).collect())
}

/// Uniform bins over `[0, max]`; values beyond `max` land in the last bin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub mean: f64,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize, max: Option<f64>) -> Result<Self> {
        if bins == 0 {
            return Err(validation("histogram needs at least one bin"));
        }
        let hi = max.unwrap_or_else(|| values.iter().copied().fold(0.0, f64::max));
        let bin_width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
        let mut counts = vec![0; bins];
        for v in values {
            counts[((v / bin_width) as usize).min(bins - 1)] += 1;
        }
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        Ok(Self { bin_width, counts, mean })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Mean estimated from bin centres.
    pub fn binned_mean(&self) -> f64 {
        let total = self.total().max(1) as f64;
        self.counts.iter().enumerate().map(|(i, c)| (i as f64 + 0.5) * self.bin_width * *c as f64).sum::<f64>() / total
    }

    /// Two columns: bin centre, count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("error,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{c}\n", (i as f64 + 0.5) * self.bin_width));
        }
        out
    }
}

/// Histogram over frames of one joint's ℓ2 detection error.
pub fn error_histogram(
    clean: &PoseSequence2D,
    corrupt: &PoseSequence2D,
    joint: usize,
    bins: usize,
    max: Option<f64>,
) -> Result<Histogram> {
    if joint >= clean.joints {
        return Err(validation(format!("joint {joint} out of range for {} joints", clean.joints)));
    }
    let d = displacement(clean, corrupt)?;
    let values: Vec<f64> = (0..clean.frames).map(|t| d[t * clean.joints + joint]).collect();
    Histogram::from_values(&values, bins, max)
}
