//! Evaluation metrics: the MPJPE family, keypoint-correctness fractions,
//! and the ski-style centre-of-mass / flexion measurements.

use serde::{Deserialize, Serialize};

use crate::alignment::{optimal_scale, procrustes_align};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::pose::Pose;
use crate::skeleton::Skeleton;

/// Default keypoint-correctness threshold: 15 cm.
pub const PCK_THRESHOLD_MM: f64 = 150.0;

/// Mean per-joint position error in mm.
pub fn mpjpe(pred: &Pose, gt: &Pose) -> Result<f64> {
    pred.check_shape(gt)?;
    let n = pred.n_joints() as f64;
    Ok(pred
        .joints()
        .iter()
        .zip(gt.joints())
        .map(|(a, b)| linalg::norm(linalg::sub(*a, *b)))
        .sum::<f64>()
        / n)
}

/// MPJPE after applying the least-squares scale factor to the prediction.
pub fn nmpjpe(pred: &Pose, gt: &Pose) -> Result<f64> {
    let s = optimal_scale(pred, gt)?;
    mpjpe(&pred.scaled(s), gt)
}

/// MPJPE after full similarity (rotation + scale) alignment.
pub fn pmpjpe(pred: &Pose, gt: &Pose) -> Result<f64> {
    let aligned = procrustes_align(pred, gt)?;
    mpjpe(&pred.rotated(&aligned.rotation).scaled(aligned.scale), gt)
}

/// Fraction of joints whose position error is below `threshold_mm`.
pub fn pck(pred: &Pose, gt: &Pose, threshold_mm: f64) -> Result<f64> {
    pred.check_shape(gt)?;
    if threshold_mm <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "pck threshold must be positive, got {threshold_mm}"
        )));
    }
    let correct = pred
        .joints()
        .iter()
        .zip(gt.joints())
        .filter(|(a, b)| linalg::norm(linalg::sub(**a, **b)) < threshold_mm)
        .count();
    Ok(correct as f64 / pred.n_joints() as f64)
}

/// PCK after applying the least-squares scale factor to the prediction.
pub fn npck(pred: &Pose, gt: &Pose, threshold_mm: f64) -> Result<f64> {
    let s = optimal_scale(pred, gt)?;
    pck(&pred.scaled(s), gt, threshold_mm)
}

/// Centre of mass: joint positions weighted by the skeleton's segment
/// weights. Relative to the pelvis, like the pose itself.
pub fn center_of_mass(pose: &Pose, skeleton: &Skeleton) -> Result<Vec3> {
    if pose.n_joints() != skeleton.n_joints() {
        return Err(Error::ShapeMismatch {
            expected: skeleton.n_joints(),
            got: pose.n_joints(),
        });
    }
    let mut com = [0.0f64; 3];
    for (c, &w) in pose.joints().iter().zip(&skeleton.segment_weights) {
        com = linalg::add(com, linalg::scale(*c, w));
    }
    Ok(com)
}

/// Distances from the centre of mass to the hip midpoint and to the ankle
/// midpoint, in mm.
pub fn com_distances(pose: &Pose, skeleton: &Skeleton) -> Result<(f64, f64)> {
    let com = center_of_mass(pose, skeleton)?;
    let midpoint = |idx: &[usize]| -> Vec3 {
        let mut m = [0.0f64; 3];
        for &j in idx {
            m = linalg::add(m, pose.joint(j));
        }
        linalg::scale(m, 1.0 / idx.len() as f64)
    };
    let hips = skeleton.hip_indices()?;
    let ankles = skeleton.ankle_indices()?;
    let com_hip = linalg::norm(linalg::sub(com, midpoint(&hips)));
    let com_ankle = linalg::norm(linalg::sub(com, midpoint(&ankles)));
    Ok((com_hip, com_ankle))
}

/// Interior angle at joint `b` of the triple `(a, b, c)`, in degrees
/// within [0, 180]. 180 degrees is a fully extended limb.
pub fn flexion_angle(pose: &Pose, triple: [usize; 3]) -> Result<f64> {
    let [a, b, c] = triple;
    let u = linalg::sub(pose.joint(a), pose.joint(b));
    let v = linalg::sub(pose.joint(c), pose.joint(b));
    let nu = linalg::norm(u);
    let nv = linalg::norm(v);
    if nu <= 0.0 || nv <= 0.0 {
        return Err(Error::DegenerateBone {
            joint: b,
            name: format!("flexion triple {triple:?}"),
        });
    }
    let cosine = (linalg::dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(cosine.acos().to_degrees())
}

/// Aggregated evaluation over a set of prediction/ground-truth pairs.
/// All fields are means of per-sample values.
///
/// COM errors are measured on the scale-normalized prediction (the same
/// scale factor as NMPJPE), so they stay meaningful for models trained
/// with a scale-free loss. Flexion errors are scale-invariant already.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_samples: usize,
    pub mpjpe_mm: f64,
    pub nmpjpe_mm: f64,
    pub pmpjpe_mm: f64,
    pub pck: f64,
    pub npck: f64,
    pub com_hip_mm: f64,
    pub com_ankle_mm: f64,
    pub hip_flexion_deg: f64,
    pub knee_flexion_deg: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "n_samples,mpjpe_mm,nmpjpe_mm,pmpjpe_mm,pck,npck,com_hip_mm,com_ankle_mm,hip_flexion_deg,knee_flexion_deg";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n_samples,
            self.mpjpe_mm,
            self.nmpjpe_mm,
            self.pmpjpe_mm,
            self.pck,
            self.npck,
            self.com_hip_mm,
            self.com_ankle_mm,
            self.hip_flexion_deg,
            self.knee_flexion_deg
        )
    }

    /// Column-wise difference `self - other` (n_samples included).
    pub fn delta(&self, other: &MetricReport) -> MetricReport {
        MetricReport {
            n_samples: self.n_samples.wrapping_sub(other.n_samples),
            mpjpe_mm: self.mpjpe_mm - other.mpjpe_mm,
            nmpjpe_mm: self.nmpjpe_mm - other.nmpjpe_mm,
            pmpjpe_mm: self.pmpjpe_mm - other.pmpjpe_mm,
            pck: self.pck - other.pck,
            npck: self.npck - other.npck,
            com_hip_mm: self.com_hip_mm - other.com_hip_mm,
            com_ankle_mm: self.com_ankle_mm - other.com_ankle_mm,
            hip_flexion_deg: self.hip_flexion_deg - other.hip_flexion_deg,
            knee_flexion_deg: self.knee_flexion_deg - other.knee_flexion_deg,
        }
    }
}

/// Per-sample metric values, averaged by [`evaluate_batch`].
#[derive(Debug, Clone, Copy)]
pub struct SampleMetrics {
    pub mpjpe_mm: f64,
    pub nmpjpe_mm: f64,
    pub pmpjpe_mm: f64,
    pub pck: f64,
    pub npck: f64,
    pub com_hip_mm: f64,
    pub com_ankle_mm: f64,
    pub hip_flexion_deg: f64,
    pub knee_flexion_deg: f64,
}

/// Evaluates one prediction against its ground truth.
pub fn evaluate_sample(
    pred: &Pose,
    gt: &Pose,
    skeleton: &Skeleton,
    pck_threshold_mm: f64,
) -> Result<SampleMetrics> {
    let triples = skeleton.limb_pairs.as_ref().ok_or(Error::MissingLimbIndices)?;
    let scale = optimal_scale(pred, gt)?;
    let scaled = pred.scaled(scale);

    let (pred_hip, pred_ankle) = com_distances(&scaled, skeleton)?;
    let (gt_hip, gt_ankle) = com_distances(gt, skeleton)?;

    let mean_abs_angle_err = |triples: &[[usize; 3]]| -> Result<f64> {
        if triples.is_empty() {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for t in triples {
            acc += (flexion_angle(pred, *t)? - flexion_angle(gt, *t)?).abs();
        }
        Ok(acc / triples.len() as f64)
    };

    Ok(SampleMetrics {
        mpjpe_mm: mpjpe(pred, gt)?,
        nmpjpe_mm: mpjpe(&scaled, gt)?,
        pmpjpe_mm: pmpjpe(pred, gt)?,
        pck: pck(pred, gt, pck_threshold_mm)?,
        npck: pck(&scaled, gt, pck_threshold_mm)?,
        com_hip_mm: (pred_hip - gt_hip).abs(),
        com_ankle_mm: (pred_ankle - gt_ankle).abs(),
        hip_flexion_deg: mean_abs_angle_err(&triples.hip)?,
        knee_flexion_deg: mean_abs_angle_err(&triples.knee)?,
    })
}

/// Mean of per-sample metrics over paired predictions and labels.
pub fn evaluate_batch(
    predictions: &[Pose],
    labels: &[Pose],
    skeleton: &Skeleton,
    pck_threshold_mm: f64,
) -> Result<MetricReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch {
            context: "metric evaluation",
        });
    }
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: predictions.len(),
            got: labels.len(),
        });
    }
    let mut acc = MetricReport {
        n_samples: predictions.len(),
        mpjpe_mm: 0.0,
        nmpjpe_mm: 0.0,
        pmpjpe_mm: 0.0,
        pck: 0.0,
        npck: 0.0,
        com_hip_mm: 0.0,
        com_ankle_mm: 0.0,
        hip_flexion_deg: 0.0,
        knee_flexion_deg: 0.0,
    };
    let inv = 1.0 / predictions.len() as f64;
    for (p, l) in predictions.iter().zip(labels) {
        let s = evaluate_sample(p, l, skeleton, pck_threshold_mm)?;
        acc.mpjpe_mm += s.mpjpe_mm * inv;
        acc.nmpjpe_mm += s.nmpjpe_mm * inv;
        acc.pmpjpe_mm += s.pmpjpe_mm * inv;
        acc.pck += s.pck * inv;
        acc.npck += s.npck * inv;
        acc.com_hip_mm += s.com_hip_mm * inv;
        acc.com_ankle_mm += s.com_ankle_mm * inv;
        acc.hip_flexion_deg += s.hip_flexion_deg * inv;
        acc.knee_flexion_deg += s.knee_flexion_deg * inv;
    }
    Ok(acc)
}
