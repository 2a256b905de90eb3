//! The three training loss terms and their weighted composition.
//!
//! All gradients follow explicit stop-gradient conventions: camera
//! rotations and the consensus reference pose are treated as constants,
//! as are the frozen anchor predictions in the regularizer. Each returned
//! per-pose gradient therefore flows only through that pose's own branch.

use serde::{Deserialize, Serialize};

use crate::alignment::{PoseDistance, PoseGradient};
use crate::consensus::{select_consensus, ConsensusResult};
use crate::error::{Error, Result};
use crate::linalg;
use crate::pose::Pose;
use crate::rotation::Rotation3;

/// Relative weights of the loss terms. The defaults follow the reference
/// configuration: heavy supervised and regularization terms, unit-weight
/// multi-view consistency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub supervised: f64,
    pub multiview: f64,
    pub regularizer: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            supervised: 100.0,
            multiview: 1.0,
            regularizer: 100.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.supervised < 0.0 || self.multiview < 0.0 || self.regularizer < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Values of the three loss terms plus their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub multiview: f64,
    pub supervised: f64,
    pub regularizer: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(multiview: f64, supervised: f64, regularizer: f64, weights: &LossWeights) -> Self {
        LossBreakdown {
            multiview,
            supervised,
            regularizer,
            total: total_loss(multiview, supervised, regularizer, weights),
        }
    }
}

/// Weighted sum of the three loss terms.
pub fn total_loss(multiview: f64, supervised: f64, regularizer: f64, weights: &LossWeights) -> f64 {
    weights.multiview * multiview + weights.supervised * supervised + weights.regularizer * regularizer
}

/// Multi-view consistency loss for one synchronized group of views.
#[derive(Debug, Clone)]
pub struct MultiViewLoss {
    pub value: f64,
    /// Gradient with respect to each view's prediction (in its own frame).
    pub gradients: Vec<PoseGradient>,
    pub consensus: ConsensusResult,
}

/// Mean over views of `distance(R_c p_c, reference)`, where the reference
/// is the consensus mean of the rotated predictions.
///
/// Gradients treat both the rotations and the reference as constants; each
/// view's gradient is the distance gradient at its rotated prediction,
/// pulled back through its rotation.
pub fn multiview_loss(
    predictions: &[Pose],
    rotations: &[Rotation3],
    consensus_size: usize,
    distance: PoseDistance,
    root: usize,
) -> Result<MultiViewLoss> {
    let n = predictions.len();
    if n < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "multi-view loss needs at least 2 views, got {n}"
        )));
    }
    if rotations.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: rotations.len(),
        });
    }
    let rotated: Vec<Pose> = predictions
        .iter()
        .zip(rotations)
        .map(|(p, r)| p.rotated(r))
        .collect();
    let consensus = select_consensus(&rotated, consensus_size, distance, root)?;

    let mut value = 0.0;
    let mut gradients = Vec::with_capacity(n);
    let inv_n = 1.0 / n as f64;
    for (q, r) in rotated.iter().zip(rotations) {
        let (v, grad_rotated) = distance.value_and_grad(q, &consensus.reference)?;
        value += v * inv_n;
        // d/dp of f(R p) = R^T grad f evaluated at R p.
        let rt = r.inverse();
        let grad: PoseGradient = grad_rotated
            .iter()
            .map(|g| linalg::scale(rt.apply(*g), inv_n))
            .collect();
        gradients.push(grad);
    }
    Ok(MultiViewLoss {
        value,
        gradients,
        consensus,
    })
}

/// Mean over samples of `distance(prediction_i, label_i)`, with the
/// gradient for each prediction.
pub fn supervised_loss(
    predictions: &[Pose],
    labels: &[Pose],
    distance: PoseDistance,
) -> Result<(f64, Vec<PoseGradient>)> {
    paired_mean_loss(predictions, labels, distance, "supervised loss")
}

/// Mean over samples of `distance(prediction_i, anchor_i)` against frozen
/// anchor predictions. Gradients flow into the current predictions only.
pub fn regularization_loss(
    predictions: &[Pose],
    anchor_predictions: &[Pose],
    distance: PoseDistance,
) -> Result<(f64, Vec<PoseGradient>)> {
    paired_mean_loss(predictions, anchor_predictions, distance, "regularization loss")
}

fn paired_mean_loss(
    predictions: &[Pose],
    targets: &[Pose],
    distance: PoseDistance,
    context: &'static str,
) -> Result<(f64, Vec<PoseGradient>)> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch { context });
    }
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            expected: predictions.len(),
            got: targets.len(),
        });
    }
    let inv_n = 1.0 / predictions.len() as f64;
    let mut value = 0.0;
    let mut gradients = Vec::with_capacity(predictions.len());
    for (p, t) in predictions.iter().zip(targets) {
        let (v, g) = distance.value_and_grad(p, t)?;
        value += v * inv_n;
        gradients.push(g.iter().map(|c| linalg::scale(*c, inv_n)).collect());
    }
    Ok((value, gradients))
}
