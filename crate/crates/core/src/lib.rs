//! Weakly-supervised multi-view training for monocular 3D human pose
//! regression, validated on a built-in synthetic capture simulator.
//!
//! A small differentiable regressor maps per-view 2D keypoint features to
//! pelvis-relative 3D poses. Training combines a supervised loss on a
//! scarce labeled set with a multi-view consistency loss on unlabeled
//! synchronized views (predictions rotated into a common frame must agree
//! with a robust consensus mean) and a regularizer that penalizes drift
//! from a frozen pretrained snapshot. Camera rotations can be taken from
//! calibration or re-estimated from the predictions themselves.

pub mod alignment;
pub mod calib;
pub mod consensus;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod pose;
pub mod regressor;
pub mod rotation;
pub mod skeleton;
pub mod synth;
pub mod trainer;

pub use alignment::PoseDistance;
pub use error::{Error, Result};
pub use pose::Pose;
pub use rotation::Rotation3;
pub use skeleton::Skeleton;
