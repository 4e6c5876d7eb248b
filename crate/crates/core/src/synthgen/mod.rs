//! Synthetic supervision: procedural motion, pinhole projection and a
//! simulated keypoint detector.

pub mod camera;
pub mod dataset;
pub mod detector;
pub mod motion;

pub use camera::{project, CameraModel};
pub use dataset::{synthesize_dataset, synthesize_sequence, SynthConfig};
pub use detector::{simulate_detection, DetectorPreset, DetectorSimConfig};
pub use motion::{generate_motion, Action, Motion, MotionConfig, RootTrajectory};
