//! Pose distances (squared error and its scale-normalized variant), their
//! analytic gradients, and rotation/scale alignment between poses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::pose::Pose;
use crate::rotation::Rotation3;

/// Gradient of a scalar with respect to a pose: one 3-vector per joint.
pub type PoseGradient = Vec<Vec3>;

/// Distance between two poses used throughout the losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseDistance {
    /// Squared Frobenius error. Can be driven to zero by shrinking both
    /// poses, which is exactly what the normalized variant avoids.
    Se,
    /// Squared error between unit-normalized poses; invariant to positive
    /// rescaling of either argument. Range [0, 4].
    Nse,
}

impl PoseDistance {
    pub fn value(self, p1: &Pose, p2: &Pose) -> Result<f64> {
        match self {
            PoseDistance::Se => se_distance(p1, p2),
            PoseDistance::Nse => nse_distance(p1, p2),
        }
    }

    /// Distance value and gradient with respect to `p1`.
    pub fn value_and_grad(self, p1: &Pose, p2: &Pose) -> Result<(f64, PoseGradient)> {
        let v = self.value(p1, p2)?;
        let g = match self {
            PoseDistance::Se => se_gradient(p1, p2)?,
            PoseDistance::Nse => nse_gradient(p1, p2)?,
        };
        Ok((v, g))
    }
}

/// Squared Frobenius distance between two poses.
pub fn se_distance(p1: &Pose, p2: &Pose) -> Result<f64> {
    p1.check_shape(p2)?;
    Ok(p1
        .joints()
        .iter()
        .zip(p2.joints())
        .map(|(a, b)| {
            let d = linalg::sub(*a, *b);
            linalg::dot(d, d)
        })
        .sum())
}

/// Gradient of [`se_distance`] with respect to `p1`: `2 (p1 - p2)`.
pub fn se_gradient(p1: &Pose, p2: &Pose) -> Result<PoseGradient> {
    p1.check_shape(p2)?;
    Ok(p1
        .joints()
        .iter()
        .zip(p2.joints())
        .map(|(a, b)| linalg::scale(linalg::sub(*a, *b), 2.0))
        .collect())
}

/// Scale-normalized squared distance `|| p1/|p1| - p2/|p2| ||^2`.
pub fn nse_distance(p1: &Pose, p2: &Pose) -> Result<f64> {
    p1.check_shape(p2)?;
    let n1 = p1.checked_norm("nse p1")?;
    let n2 = p2.checked_norm("nse p2")?;
    Ok(p1
        .joints()
        .iter()
        .zip(p2.joints())
        .map(|(a, b)| {
            let d = linalg::sub(linalg::scale(*a, 1.0 / n1), linalg::scale(*b, 1.0 / n2));
            linalg::dot(d, d)
        })
        .sum())
}

/// Analytic gradient of [`nse_distance`] with respect to `p1`.
///
/// With u_i = p_i / |p_i| this is `(2/|p1|) (I - u1 u1^T) (u1 - u2)`
/// applied to the flattened pose, i.e. the residual projected onto the
/// tangent space of the unit sphere at u1.
pub fn nse_gradient(p1: &Pose, p2: &Pose) -> Result<PoseGradient> {
    p1.check_shape(p2)?;
    let n1 = p1.checked_norm("nse p1")?;
    let n2 = p2.checked_norm("nse p2")?;
    let u1: Vec<Vec3> = p1.joints().iter().map(|c| linalg::scale(*c, 1.0 / n1)).collect();
    let u2: Vec<Vec3> = p2.joints().iter().map(|c| linalg::scale(*c, 1.0 / n2)).collect();
    // <u1, u1 - u2> = 1 - <u1, u2>
    let mut u1_dot_u2 = 0.0;
    for (a, b) in u1.iter().zip(&u2) {
        u1_dot_u2 += linalg::dot(*a, *b);
    }
    let proj = 1.0 - u1_dot_u2;
    Ok(u1
        .iter()
        .zip(&u2)
        .map(|(a, b)| {
            let resid = linalg::sub(*a, *b);
            let tangent = linalg::sub(resid, linalg::scale(*a, proj));
            linalg::scale(tangent, 2.0 / n1)
        })
        .collect())
}

/// How the poses are normalized inside the rotation-estimation objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    /// Divide the torso columns by the full-pose norm (default).
    FullPose,
    /// Divide by the norm of the torso columns only.
    TorsoOnly,
}

/// Result of a rotation or similarity fit.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub rotation: Rotation3,
    /// 1.0 for rotation-only fits.
    pub scale: f64,
    /// Value of the minimized objective at the optimum.
    pub residual: f64,
}

/// Best rotation taking `src` onto `dst` in the normalized least-squares
/// sense, restricted to the torso joints:
/// `argmin_R || R src/|src| - dst/|dst| ||^2` over torso columns.
///
/// The minimizer does not depend on the normalization (it only rescales
/// the objective), but the reported residual does; `scope` selects it.
/// This routine is used as a stop-gradient oracle during training: it is
/// never differentiated through.
pub fn estimate_rotation(
    src: &Pose,
    dst: &Pose,
    torso_set: &[usize],
    scope: NormScope,
) -> Result<AlignmentResult> {
    src.check_shape(dst)?;
    if torso_set.len() < 3 {
        return Err(Error::RankDeficient);
    }
    let (src_norm, dst_norm) = match scope {
        NormScope::FullPose => (
            src.checked_norm("rotation src")?,
            dst.checked_norm("rotation dst")?,
        ),
        NormScope::TorsoOnly => (
            subset_norm(src, torso_set, "rotation src")?,
            subset_norm(dst, torso_set, "rotation dst")?,
        ),
    };

    // Cross-covariance H = sum_j b_j a_j^T over torso columns of the
    // normalized poses; the optimal R maximizes tr(R^T H).
    let mut h = [[0.0f64; 3]; 3];
    for &j in torso_set {
        if j >= src.n_joints() {
            return Err(Error::ShapeMismatch {
                expected: src.n_joints(),
                got: j + 1,
            });
        }
        let a = linalg::scale(src.joint(j), 1.0 / src_norm);
        let b = linalg::scale(dst.joint(j), 1.0 / dst_norm);
        for r in 0..3 {
            for c in 0..3 {
                h[r][c] += b[r] * a[c];
            }
        }
    }
    let r = linalg::fit_rotation(&h)?;
    let rotation = Rotation3::from_matrix(r)?;

    let mut residual = 0.0;
    for &j in torso_set {
        let a = rotation.apply(linalg::scale(src.joint(j), 1.0 / src_norm));
        let b = linalg::scale(dst.joint(j), 1.0 / dst_norm);
        let d = linalg::sub(a, b);
        residual += linalg::dot(d, d);
    }
    Ok(AlignmentResult {
        rotation,
        scale: 1.0,
        residual,
    })
}

fn subset_norm(p: &Pose, subset: &[usize], context: &'static str) -> Result<f64> {
    let n: f64 = subset
        .iter()
        .map(|&j| linalg::dot(p.joint(j), p.joint(j)))
        .sum::<f64>()
        .sqrt();
    if n <= crate::pose::DEGENERATE_NORM_MM {
        return Err(Error::DegeneratePose {
            context,
            norm: n,
            threshold: crate::pose::DEGENERATE_NORM_MM,
        });
    }
    Ok(n)
}

/// Least-squares scale `s* = <pred, gt> / <pred, pred>`, the unique
/// minimizer of `|| s pred - gt ||^2`.
pub fn optimal_scale(pred: &Pose, gt: &Pose) -> Result<f64> {
    pred.check_shape(gt)?;
    let denom = pred.checked_norm("optimal scale pred")?;
    Ok(pred.dot(gt)? / (denom * denom))
}

/// Similarity alignment of `pred` onto `gt`: rotation over all joints plus
/// least-squares scale (translation is already fixed by pelvis-centering).
/// Minimizes `|| s R pred - gt ||^2`.
pub fn procrustes_align(pred: &Pose, gt: &Pose) -> Result<AlignmentResult> {
    pred.check_shape(gt)?;
    let pred_norm = pred.checked_norm("procrustes pred")?;
    gt.checked_norm("procrustes gt")?;
    let mut h = [[0.0f64; 3]; 3];
    for (a, b) in pred.joints().iter().zip(gt.joints()) {
        for r in 0..3 {
            for c in 0..3 {
                h[r][c] += b[r] * a[c];
            }
        }
    }
    let rotation = Rotation3::from_matrix(linalg::fit_rotation(&h)?)?;
    let rotated = pred.rotated(&rotation);
    let scale = rotated.dot(gt)? / (pred_norm * pred_norm);
    if scale <= 0.0 {
        return Err(Error::DegeneratePose {
            context: "procrustes scale",
            norm: scale,
            threshold: 0.0,
        });
    }
    let residual = se_distance(&rotated.scaled(scale), gt)?;
    Ok(AlignmentResult {
        rotation,
        scale,
        residual,
    })
}
