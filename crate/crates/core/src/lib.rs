//! Robust temporal 2D-to-3D human pose lifting.
//!
//! The crate covers the whole pipeline at desk scale: synthetic articulated
//! motion and a simulated keypoint detector ([`synthgen`]), image and video
//! corruption operators with corrupted-split construction ([`corrupt`]),
//! temporal additive Gaussian noise augmentation ([`tagn`]), a from-scratch
//! temporal convolutional lifter with confidence-aware blocks ([`net`]), and
//! the corruption-aware evaluation metrics ([`metrics`]).

pub mod bundle;
pub mod corrupt;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod net;
pub mod pose;
pub mod rng;
pub mod skeleton;
pub mod synthgen;
pub mod tagn;
pub mod tensorfile;

pub use bundle::{load_bundle, save_bundle, CorruptedView, DatasetBundle, SequenceRecord};
pub use error::{Error, Result};
pub use pose::{denormalize_2d, normalize_2d, root_center_3d, ConfidenceSequence, PoseSequence2D, PoseSequence3D};
pub use rng::SeededRng;
pub use skeleton::SkeletonLayout;
