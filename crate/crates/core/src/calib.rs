//! Camera-rotation calibration from per-view pose predictions.
//!
//! For every multi-view sample the rotation of each camera relative to the
//! first view is estimated from the poses alone; when ground-truth
//! rotations are stored, the geodesic angle error is reported.

use crate::alignment::{estimate_rotation, NormScope};
use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::regressor::Checkpoint;
use crate::rotation::Rotation3;
use crate::synth::Dataset;

/// Where per-view poses come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionSource {
    /// Use the stored per-view annotated poses.
    Oracle,
    /// Run the network on each view's features.
    Network,
}

/// One estimated rotation (camera `camera` of unlabeled sample `sample`).
#[derive(Debug, Clone)]
pub struct CalibRecord {
    pub sample: usize,
    pub camera: usize,
    pub estimated: Rotation3,
    /// Geodesic error against the stored rotation, degrees.
    pub angle_error_deg: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CalibReport {
    pub records: Vec<CalibRecord>,
    /// Error statistics in degrees over all records with ground truth.
    pub mean_deg: Option<f64>,
    pub median_deg: Option<f64>,
    pub max_deg: Option<f64>,
}

impl CalibReport {
    pub const CSV_HEADER: &'static str = "sample,camera,angle_error_deg";

    /// Per-record dump; the error column is empty without ground truth.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            match r.angle_error_deg {
                Some(e) => out.push_str(&format!("{},{},{}\n", r.sample, r.camera, e)),
                None => out.push_str(&format!("{},{},\n", r.sample, r.camera)),
            }
        }
        out
    }
}

/// Estimates per-view rotations for every multi-view sample in the
/// dataset. Errors if the dataset has no usable multi-view samples.
pub fn calibrate(
    dataset: &Dataset,
    source: PredictionSource,
    checkpoint: Option<&Checkpoint>,
) -> Result<CalibReport> {
    if dataset.unlabeled.is_empty() || dataset.unlabeled.iter().all(|s| s.views.len() < 2) {
        return Err(Error::DatasetTooSmall(
            "calibration needs multi-view samples with at least 2 views".into(),
        ));
    }
    let torso = &dataset.skeleton.torso_set;
    let mut records = Vec::new();
    for (si, sample) in dataset.unlabeled.iter().enumerate() {
        if sample.views.len() < 2 {
            continue;
        }
        let poses: Vec<Pose> = match source {
            PredictionSource::Oracle => {
                sample.views.iter().map(|v| v.pose_mm.clone()).collect()
            }
            PredictionSource::Network => {
                let ckpt = checkpoint.ok_or_else(|| {
                    Error::InvalidConfig("network calibration requires a checkpoint".into())
                })?;
                sample
                    .views
                    .iter()
                    .map(|v| ckpt.predict(&v.features))
                    .collect::<Result<_>>()?
            }
        };
        for (vi, view) in sample.views.iter().enumerate().skip(1) {
            let fit = estimate_rotation(&poses[vi], &poses[0], torso, NormScope::FullPose)?;
            // Stored rotations map to the dataset's view 0; re-express the
            // pair relative to this sample's first view.
            let angle_error_deg = match (view.rotation, sample.views[0].rotation) {
                (Some(r_v), Some(r_0)) => {
                    let truth = r_0.inverse().compose(&r_v);
                    Some(fit.rotation.angle_to(&truth).to_degrees())
                }
                _ => None,
            };
            records.push(CalibRecord {
                sample: si,
                camera: view.camera,
                estimated: fit.rotation,
                angle_error_deg,
            });
        }
    }

    let mut errors: Vec<f64> = records.iter().filter_map(|r| r.angle_error_deg).collect();
    let (mean_deg, median_deg, max_deg) = if errors.is_empty() {
        (None, None, None)
    } else {
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let median = if errors.len() % 2 == 1 {
            errors[errors.len() / 2]
        } else {
            0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2])
        };
        (Some(mean), Some(median), Some(*errors.last().unwrap()))
    };
    Ok(CalibReport {
        records,
        mean_deg,
        median_deg,
        max_deg,
    })
}
