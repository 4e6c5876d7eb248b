//! Geometric stand-in for a 2D keypoint detector.
//!
//! Errors and confidences are computed from the ground-truth keypoints and the
//! corruption manifest rather than from pixels. Every joint consumes the same
//! number of random draws regardless of the manifest, so a clean run and a
//! zero-severity run share their noise realization.

use serde::{Deserialize, Serialize};

use crate::corrupt::{CorruptionManifest, CorruptionOperator};
use crate::error::{validation, Result};
use crate::pose::{ConfidenceSequence, PoseSequence2D};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSimConfig {
    pub base_sigma: f64,
    pub occluded_sigma: f64,
    pub outlier_prob: f64,
    pub outlier_sigma: f64,
    pub pixelnoise_gain: f64,
    pub blur_velocity_gain: f64,
    pub conf_lambda: f64,
    pub conf_jitter: f64,
    pub miscalibration_prob: f64,
}

impl Default for DetectorSimConfig {
    fn default() -> Self {
        Self::precise()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorPreset {
    Precise,
    Lite,
}

impl DetectorSimConfig {
    pub fn precise() -> Self {
        Self {
            base_sigma: 0.005,
            occluded_sigma: 0.15,
            outlier_prob: 0.05,
            outlier_sigma: 0.5,
            pixelnoise_gain: 8.0,
            blur_velocity_gain: 2.0,
            conf_lambda: 0.05,
            conf_jitter: 0.05,
            miscalibration_prob: 0.15,
        }
    }

    /// Noisier, less calibrated detector.
    pub fn lite() -> Self {
        Self {
            base_sigma: 0.010,
            miscalibration_prob: 0.30,
            ..Self::precise()
        }
    }

    pub fn preset(p: DetectorPreset) -> Self {
        match p {
            DetectorPreset::Precise => Self::precise(),
            DetectorPreset::Lite => Self::lite(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("outlier_prob", self.outlier_prob),
            ("miscalibration_prob", self.miscalibration_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(validation(format!("detector.{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("base_sigma", self.base_sigma),
            ("occluded_sigma", self.occluded_sigma),
            ("outlier_sigma", self.outlier_sigma),
            ("pixelnoise_gain", self.pixelnoise_gain),
            ("blur_velocity_gain", self.blur_velocity_gain),
            ("conf_jitter", self.conf_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(validation(format!("detector.{name} must be non-negative, got {v}")));
            }
        }
        if !(self.conf_lambda > 0.0) {
            return Err(validation("detector.conf_lambda must be positive"));
        }
        Ok(())
    }
}

/// Per-joint error scale for frame `t`, and whether the joint is hidden.
fn joint_sigma(
    gt: &PoseSequence2D,
    manifest: Option<&CorruptionManifest>,
    cfg: &DetectorSimConfig,
    t: usize,
    j: usize,
) -> (f64, bool) {
    let Some(m) = manifest else {
        return (cfg.base_sigma, false);
    };
    let [px, py] = gt.pixel(t, j);
    if m.occludes(t, px, py) {
        return (cfg.occluded_sigma, true);
    }
    let sigma = match m.operator {
        op if op.is_pixel_noise() => cfg.base_sigma * (1.0 + cfg.pixelnoise_gain * m.severity),
        CorruptionOperator::MotionBlur => {
            // One frame per step; frame 0 has no velocity.
            let speed = if t == 0 {
                0.0
            } else {
                let (a, b) = (gt.get(t, j), gt.get(t - 1, j));
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            };
            cfg.base_sigma * (1.0 + cfg.blur_velocity_gain * speed)
        }
        _ => cfg.base_sigma,
    };
    (sigma, false)
}

pub fn simulate_detection(
    gt2d: &PoseSequence2D,
    manifest: Option<&CorruptionManifest>,
    cfg: &DetectorSimConfig,
    rng: &mut SeededRng,
) -> Result<(PoseSequence2D, ConfidenceSequence)> {
    cfg.validate()?;
    if let Some(m) = manifest {
        if m.frames() != gt2d.frames {
            return Err(validation(format!(
                "manifest covers {} frames, sequence has {}",
                m.frames(),
                gt2d.frames
            )));
        }
    }
    let mut det = gt2d.clone();
    let mut scores = Vec::with_capacity(gt2d.frames * gt2d.joints);
    for t in 0..gt2d.frames {
        for j in 0..gt2d.joints {
            let (sigma, occluded) = joint_sigma(gt2d, manifest, cfg, t, j);
            let noise = [rng.normal() * sigma, rng.normal() * sigma];
            let outlier_draw = rng.uniform();
            let outlier = [rng.normal() * cfg.outlier_sigma, rng.normal() * cfg.outlier_sigma];
            let jitter = rng.normal() * cfg.conf_jitter;
            let miscal_draw = rng.uniform();
            let miscal_value = rng.uniform_range(0.0, 0.5);

            let mut err = noise;
            if occluded && outlier_draw < cfg.outlier_prob {
                err[0] += outlier[0];
                err[1] += outlier[1];
            }
            let g = gt2d.get(t, j);
            det.set(t, j, [g[0] + err[0], g[1] + err[1]]);
            let dist = (err[0] * err[0] + err[1] * err[1]).sqrt();
            let mut c = ((-dist / cfg.conf_lambda).exp() + jitter).clamp(0.0, 1.0);
            if miscal_draw < cfg.miscalibration_prob {
                c = miscal_value;
            }
            scores.push(c);
        }
    }
    let conf = ConfidenceSequence::new(gt2d.frames, gt2d.joints, scores)?;
    Ok((det, conf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrupt::{FrameCorruption, Rect};

    fn grid_sequence(frames: usize, joints: usize) -> PoseSequence2D {
        let data = (0..frames * joints)
            .flat_map(|i| {
                let t = (i / joints) as f64;
                let j = (i % joints) as f64;
                [-0.5 + 0.05 * j + 0.001 * t, -0.3 + 0.04 * j]
            })
            .collect();
        PoseSequence2D::new(frames, joints, data, 1000, 1000).unwrap()
    }

    #[test]
    fn noiseless_detector_is_exact() {
        let gt = grid_sequence(10, 16);
        let cfg = DetectorSimConfig {
            base_sigma: 0.0,
            conf_jitter: 0.0,
            miscalibration_prob: 0.0,
            ..Default::default()
        };
        let (det, conf) = simulate_detection(&gt, None, &cfg, &mut SeededRng::new(1, 0)).unwrap();
        assert_eq!(det, gt);
        assert!(conf.scores.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn forced_miscalibration_caps_confidence() {
        let gt = grid_sequence(50, 16);
        let cfg = DetectorSimConfig {
            miscalibration_prob: 1.0,
            ..Default::default()
        };
        let (_, conf) = simulate_detection(&gt, None, &cfg, &mut SeededRng::new(2, 0)).unwrap();
        assert!(conf.scores.iter().all(|&c| (0.0..=0.5).contains(&c)));
    }

    #[test]
    fn null_and_zero_severity_manifest_agree() {
        let gt = grid_sequence(20, 16);
        let cfg = DetectorSimConfig::default();
        let a = simulate_detection(&gt, None, &cfg, &mut SeededRng::new(3, 0)).unwrap();
        let m = CorruptionManifest {
            operator: CorruptionOperator::GaussianNoise,
            severity: 0.0,
            width_px: 1000,
            height_px: 1000,
            per_frame: vec![FrameCorruption::default(); 20],
        };
        let b = simulate_detection(&gt, Some(&m), &cfg, &mut SeededRng::new(3, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn occluded_error_matches_mixture_variance() {
        // One joint fully covered in every frame.
        let n = 100_000;
        let gt = PoseSequence2D::new(n, 1, vec![0.0; 2 * n], 1000, 1000).unwrap();
        let m = CorruptionManifest {
            operator: CorruptionOperator::GuidedPatchErase,
            severity: 1.0,
            width_px: 1000,
            height_px: 1000,
            per_frame: vec![
                FrameCorruption {
                    erased_rects: vec![Rect::from([0, 0, 999, 999])],
                    ..Default::default()
                };
                n
            ],
        };
        let cfg = DetectorSimConfig::default();
        let (det, _) = simulate_detection(&gt, Some(&m), &cfg, &mut SeededRng::new(4, 0)).unwrap();
        let xs: Vec<f64> = det.data.iter().step_by(2).copied().collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        // Per-axis variance of N(0, s_o^2) plus, with probability q, N(0, s_out^2).
        let analytic = (cfg.occluded_sigma.powi(2) + cfg.outlier_prob * cfg.outlier_sigma.powi(2)).sqrt();
        assert!((std / analytic - 1.0).abs() < 0.03, "std {std} vs {analytic}");
    }

    #[test]
    fn length_mismatch_rejected() {
        let gt = grid_sequence(5, 2);
        let m = CorruptionManifest::clean(4, 1000, 1000);
        assert!(simulate_detection(&gt, Some(&m), &DetectorSimConfig::default(), &mut SeededRng::new(0, 0)).is_err());
    }
}
