use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{DatasetBundle, SequenceRecord};
use crate::error::{validation, Result};
use crate::rng::SeededRng;
use crate::skeleton::SkeletonLayout;
use crate::synthgen::camera::{project, CameraModel};
use crate::synthgen::detector::{simulate_detection, DetectorSimConfig};
use crate::synthgen::motion::{generate_motion, Action, MotionConfig};

/// Recipe for a set of synthetic sequences; per-sequence motion parameters
/// are drawn from the ranges below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sequences: usize,
    pub frames: usize,
    pub fps: f64,
    pub actions: Vec<Action>,
    pub amplitude_range: (f64, f64),
    pub gait_period_range: (f64, f64),
    pub walk_drift_range: (f64, f64),
    pub distance_range_mm: (f64, f64),
    pub camera: CameraModel,
    pub detector: DetectorSimConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sequences: 60,
            frames: 500,
            fps: 50.0,
            actions: Action::ALL.to_vec(),
            amplitude_range: (0.6, 1.4),
            gait_period_range: (40.0, 70.0),
            walk_drift_range: (0.0, 12.0),
            distance_range_mm: (4500.0, 5500.0),
            camera: CameraModel::default(),
            detector: DetectorSimConfig::default(),
        }
    }
}

fn check_range(name: &str, r: (f64, f64)) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite() && r.0 <= r.1) {
        return Err(validation(format!("synth.{name} must be a finite (lo, hi) with lo <= hi")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(validation("synth.frames must be >= 1"));
        }
        if self.actions.is_empty() {
            return Err(validation("synth.actions must not be empty"));
        }
        check_range("amplitude_range", self.amplitude_range)?;
        check_range("gait_period_range", self.gait_period_range)?;
        check_range("walk_drift_range", self.walk_drift_range)?;
        check_range("distance_range_mm", self.distance_range_mm)?;
        self.camera.validate()?;
        self.detector.validate()
    }
}

/// One synthetic sequence: motion, projection and clean detection.
pub fn synthesize_sequence(
    layout: &SkeletonLayout,
    cfg: &SynthConfig,
    id: String,
    rng: &SeededRng,
) -> Result<SequenceRecord> {
    let mut params = rng.child("params");
    let action = cfg.actions[params.int_inclusive(0, cfg.actions.len() - 1)];
    let motion_cfg = MotionConfig {
        action,
        duration_frames: cfg.frames,
        fps: cfg.fps,
        gait_period_frames: params.uniform_range(cfg.gait_period_range.0, cfg.gait_period_range.1),
        amplitude_scale: params.uniform_range(cfg.amplitude_range.0, cfg.amplitude_range.1),
        drift_speed_mm_per_frame: if action == Action::Walk {
            params.uniform_range(cfg.walk_drift_range.0, cfg.walk_drift_range.1)
        } else {
            0.0
        },
    };
    let camera = CameraModel {
        subject_distance_mm: params.uniform_range(cfg.distance_range_mm.0, cfg.distance_range_mm.1),
        ..cfg.camera.clone()
    };
    let motion = generate_motion(layout, &motion_cfg, &mut rng.child("motion"))?;
    let gt2d = project(&camera, &motion.pose, &motion.root)?;
    let (det, conf) = simulate_detection(&gt2d, None, &cfg.detector, &mut rng.child("detect"))?;
    Ok(SequenceRecord {
        id,
        gt3d: motion.pose,
        gt2d,
        det2d_clean: det,
        conf_clean: conf,
        corrupted: None,
    }
    .quantized())
}

pub fn synthesize_dataset(
    layout: &SkeletonLayout,
    cfg: &SynthConfig,
    id_prefix: &str,
    rng: &SeededRng,
) -> Result<DatasetBundle> {
    layout.validate()?;
    cfg.validate()?;
    let sequences = (0..cfg.sequences)
        .into_par_iter()
        .map(|i| {
            synthesize_sequence(layout, cfg, format!("{id_prefix}{i:04}"), &rng.child_index(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetBundle {
        layout: layout.clone(),
        sequences,
    })
}
