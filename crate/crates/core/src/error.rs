use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library. The CLI maps these onto exit codes, so
/// variants distinguish configuration problems from numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pose has {got} joints, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("feature vector has length {got}, expected {expected}")]
    FeatureMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("degenerate pose in {context}: norm {norm:.3e} mm below threshold {threshold:.1e} mm")]
    DegeneratePose {
        context: &'static str,
        norm: f64,
        threshold: f64,
    },

    #[error("degenerate bone at joint {joint} ({name}): parent and child coincide")]
    DegenerateBone { joint: usize, name: String },

    #[error("point configuration is rank-deficient; rotation is not identifiable")]
    RankDeficient,

    #[error("matrix is not a proper rotation (orthonormality or determinant off by {defect:.3e})")]
    NotARotation { defect: f64 },

    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("skeleton mismatch: checkpoint has {checkpoint} joints, dataset has {dataset}")]
    SkeletonMismatch { checkpoint: usize, dataset: usize },

    #[error("limb index triples are not defined on this skeleton")]
    MissingLimbIndices,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty batch in {context}")]
    EmptyBatch { context: &'static str },

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("multi-view sample {sample} has no stored camera rotations")]
    MissingRotations { sample: usize },

    #[error("joint {joint} behind camera (depth {depth:.1} mm)")]
    JointBehindCamera { joint: usize, depth: f64 },

    #[error("unsupported dataset format version {got} (expected {expected})")]
    FormatVersion { expected: u32, got: u32 },

    #[error("degenerate prediction at iteration {iteration}: {source}")]
    DegeneratePrediction {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of numerical origin (as opposed to bad inputs,
    /// configuration, or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::DegeneratePose { .. }
                | Error::DegenerateBone { .. }
                | Error::RankDeficient
                | Error::NotARotation { .. }
                | Error::JointBehindCamera { .. }
                | Error::DegeneratePrediction { .. }
        )
    }
}
