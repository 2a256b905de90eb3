//! End-to-end training: supervised pretraining with a frozen snapshot,
//! then weakly-supervised iterations combining the supervised,
//! multi-view-consistency and drift-regularization terms under Adam.
//!
//! Per weak iteration: a batch of 8 labeled samples plus two synchronized
//! groups of 4 views is assembled; camera rotations are either taken from
//! the rig calibration or re-estimated from the current predictions (and
//! held fixed for the update — gradients never flow through the rotation
//! fit, the consensus reference, or the frozen snapshot).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::alignment::{estimate_rotation, NormScope, PoseDistance};
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{
    multiview_loss, regularization_loss, supervised_loss, LossBreakdown, LossWeights,
};
use crate::metrics::{self, MetricReport};
use crate::pose::Pose;
use crate::regressor::{Checkpoint, FeatureScaler, ParamGrads, RegressorParams};
use crate::rotation::Rotation3;
use crate::skeleton::Skeleton;
use crate::synth::{augment, Dataset, LabeledSample};

/// Where the per-group camera rotations come from during weak training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationSource {
    /// Use the rotations stored with each multi-view sample.
    Known,
    /// Re-estimate rotations from the current predictions each batch.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_labeled: usize,
    pub batch_unlabeled_groups: usize,
    /// Views per synchronized group; a random subset is drawn when a
    /// sample has more.
    pub group_views: usize,
    pub consensus_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Weakly-supervised iterations after pretraining.
    pub iterations: u64,
    /// Supervised pretraining budget; the snapshot is the best-validation
    /// iterate within it.
    pub pretrain_iterations: u64,
    pub eval_every: u64,
    pub distance: PoseDistance,
    pub rotations: RotationSource,
    pub weights: LossWeights,
    pub hidden_dims: Vec<usize>,
    pub augment: bool,
    pub pck_threshold_mm: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_labeled: 8,
            batch_unlabeled_groups: 2,
            group_views: 4,
            consensus_size: 2,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            iterations: 1000,
            pretrain_iterations: 1000,
            eval_every: 50,
            distance: PoseDistance::Nse,
            rotations: RotationSource::Known,
            weights: LossWeights::default(),
            hidden_dims: vec![256, 256],
            augment: true,
            pck_threshold_mm: metrics::PCK_THRESHOLD_MM,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.batch_labeled == 0 {
            return bad("batch_labeled must be positive");
        }
        if self.group_views < 2 {
            return bad("group_views must be at least 2");
        }
        if self.consensus_size < 2 || self.consensus_size > self.group_views {
            return bad("consensus_size must be in [2, group_views]");
        }
        if self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if self.pck_threshold_mm <= 0.0 {
            return bad("pck_threshold_mm must be positive");
        }
        self.weights.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainConfig> {
        let cfg: TrainConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn uses_unlabeled(&self) -> bool {
        self.weights.multiview > 0.0 || self.weights.regularizer > 0.0
    }
}

/// Adam moment accumulators, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ParamGrads,
    v: ParamGrads,
    step: u64,
}

impl AdamState {
    pub fn new(params: &RegressorParams) -> Self {
        AdamState {
            m: ParamGrads::zeros_like(params),
            v: ParamGrads::zeros_like(params),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update of `params` with gradients `grads`.
    pub fn step(&mut self, params: &mut RegressorParams, grads: &ParamGrads, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.adam_beta1.powi(self.step as i32);
        let c2 = 1.0 - cfg.adam_beta2.powi(self.step as i32);
        let mut update = ParamGrads::zeros_like(params);
        let apply = |m: &mut Vec<f64>, v: &mut Vec<f64>, g: &[f64], u: &mut Vec<f64>| {
            for i in 0..g.len() {
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                u[i] = cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
        };
        for l in 0..grads.weights.len() {
            apply(
                &mut self.m.weights[l],
                &mut self.v.weights[l],
                &grads.weights[l],
                &mut update.weights[l],
            );
            apply(
                &mut self.m.biases[l],
                &mut self.v.biases[l],
                &grads.biases[l],
                &mut update.biases[l],
            );
        }
        params.apply_update(&update);
    }
}

/// One synchronized group within a batch (features already standardized).
#[derive(Debug, Clone)]
pub struct GroupBatch {
    pub features: Vec<Vec<f64>>,
    pub known_rotations: Option<Vec<Rotation3>>,
}

/// One training batch: labeled pairs plus synchronized view groups.
#[derive(Debug, Clone)]
pub struct Batch {
    pub labeled_features: Vec<Vec<f64>>,
    pub labels: Vec<Pose>,
    pub groups: Vec<GroupBatch>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub losses: LossBreakdown,
    /// Groups whose rotation estimation failed this step; their
    /// consistency term was skipped (the regularizer still applies).
    pub skipped_groups: u64,
}

/// One gradient step on a prepared batch. Forward on every input,
/// per-term analytic gradients under the stop-gradient contracts, one
/// Adam update. `gamma` only provides the frozen regularization anchors.
pub fn train_step(
    params: &mut RegressorParams,
    gamma: &RegressorParams,
    batch: &Batch,
    adam: &mut AdamState,
    skeleton: &Skeleton,
    config: &TrainConfig,
) -> Result<StepOutcome> {
    let root = skeleton.root();
    let w = &config.weights;

    let labeled_preds: Vec<Pose> = batch
        .labeled_features
        .iter()
        .map(|f| params.forward(f))
        .collect::<Result<_>>()?;
    let (s_value, s_grads) = supervised_loss(&labeled_preds, &batch.labels, config.distance)?;

    // Per-group predictions and consistency terms.
    let mut group_preds: Vec<Vec<Pose>> = Vec::with_capacity(batch.groups.len());
    let mut m_terms: Vec<Option<(f64, Vec<Vec<linalg::Vec3>>)>> = Vec::new();
    let mut skipped = 0u64;
    for group in &batch.groups {
        let preds: Vec<Pose> = group
            .features
            .iter()
            .map(|f| params.forward(f))
            .collect::<Result<_>>()?;
        let rotations: Option<Vec<Rotation3>> = match config.rotations {
            RotationSource::Known => Some(
                group
                    .known_rotations
                    .clone()
                    .ok_or(Error::MissingRotations { sample: 0 })?,
            ),
            RotationSource::Estimated => {
                let mut rots = vec![Rotation3::identity()];
                let mut ok = true;
                for pred in preds.iter().skip(1) {
                    match estimate_rotation(pred, &preds[0], &skeleton.torso_set, NormScope::FullPose)
                    {
                        Ok(fit) => rots.push(fit.rotation),
                        Err(e) if e.is_numerical() => {
                            ok = false;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if ok {
                    Some(rots)
                } else {
                    skipped += 1;
                    None
                }
            }
        };
        let term = match rotations {
            Some(rots) => {
                let out = multiview_loss(&preds, &rots, config.consensus_size, config.distance, root)?;
                Some((out.value, out.gradients))
            }
            None => None,
        };
        m_terms.push(term);
        group_preds.push(preds);
    }

    let active = m_terms.iter().filter(|t| t.is_some()).count();
    let m_value = if active > 0 {
        m_terms
            .iter()
            .flatten()
            .map(|(v, _)| *v)
            .sum::<f64>()
            / active as f64
    } else {
        0.0
    };

    // Regularization against the frozen snapshot, over all views of all
    // groups (flat mean).
    let (r_value, r_grads) = if w.regularizer > 0.0 && !batch.groups.is_empty() {
        let all_preds: Vec<Pose> = group_preds.iter().flatten().cloned().collect();
        let anchors: Vec<Pose> = batch
            .groups
            .iter()
            .flat_map(|g| g.features.iter())
            .map(|f| gamma.forward(f))
            .collect::<Result<_>>()?;
        let (v, g) = regularization_loss(&all_preds, &anchors, config.distance)?;
        (v, Some(g))
    } else {
        (0.0, None)
    };

    // Accumulate parameter gradients in a fixed order: labeled samples,
    // then group views.
    let mut grads = ParamGrads::zeros_like(params);
    for (i, features) in batch.labeled_features.iter().enumerate() {
        let pose_grad: Vec<linalg::Vec3> = s_grads[i]
            .iter()
            .map(|c| linalg::scale(*c, w.supervised))
            .collect();
        let g = params.backward(features, &pose_grad)?;
        grads.accumulate(&g, 1.0);
    }
    let m_scale = if active > 0 { w.multiview / active as f64 } else { 0.0 };
    let mut flat_view = 0usize;
    for (gi, group) in batch.groups.iter().enumerate() {
        for (vi, features) in group.features.iter().enumerate() {
            let mut pose_grad = vec![[0.0f64; 3]; params.n_joints()];
            if let Some((_, m_grads)) = &m_terms[gi] {
                for (pg, mg) in pose_grad.iter_mut().zip(&m_grads[vi]) {
                    *pg = linalg::add(*pg, linalg::scale(*mg, m_scale));
                }
            }
            if let Some(rg) = &r_grads {
                for (pg, rgc) in pose_grad.iter_mut().zip(&rg[flat_view]) {
                    *pg = linalg::add(*pg, linalg::scale(*rgc, w.regularizer));
                }
            }
            if pose_grad.iter().any(|c| linalg::norm(*c) > 0.0) {
                let g = params.backward(features, &pose_grad)?;
                grads.accumulate(&g, 1.0);
            }
            flat_view += 1;
        }
    }

    adam.step(params, &grads, config);
    Ok(StepOutcome {
        losses: LossBreakdown::new(m_value, s_value, r_value, w),
        skipped_groups: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub iteration: u64,
    pub m: f64,
    pub s: f64,
    pub r: f64,
    pub total: f64,
    pub val_nmpjpe: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    pub skipped_groups: u64,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "iteration,m,s,r,total,val_nmpjpe";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.iteration, row.m, row.s, row.r, row.total, row.val_nmpjpe
            ));
        }
        out
    }

    pub fn final_val_nmpjpe(&self) -> Option<f64> {
        self.rows.last().map(|r| r.val_nmpjpe)
    }

    pub fn min_val_nmpjpe(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| r.val_nmpjpe)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final parameters.
    pub checkpoint: Checkpoint,
    /// Frozen snapshot from the pretraining budget (best validation).
    pub gamma: Checkpoint,
    pub log: TrainLog,
}

/// Supervised pretraining only: best-validation snapshot within the
/// configured budget. Equivalent to [`train`] with zero weak iterations.
pub fn pretrain(
    dataset: &Dataset,
    val: &[LabeledSample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        iterations: 0,
        ..config.clone()
    };
    train(dataset, &cfg, val)
}

/// Mean validation NMPJPE of the network on a labeled set.
pub fn validation_nmpjpe(
    params: &RegressorParams,
    scaler: &FeatureScaler,
    val: &[LabeledSample],
) -> Result<f64> {
    if val.is_empty() {
        return Err(Error::EmptyBatch {
            context: "validation set",
        });
    }
    let mut acc = 0.0;
    for s in val {
        let pred = params.forward(&scaler.apply(&s.features)?)?;
        acc += metrics::nmpjpe(&pred, &s.pose_mm)?;
    }
    Ok(acc / val.len() as f64)
}

/// Full training run: pretraining, snapshot, weakly-supervised loop.
/// Deterministic for a given (dataset, config): batch sampling for the
/// labeled and unlabeled streams uses separate seeded RNGs so that runs
/// with the unlabeled terms disabled reproduce plain supervised training
/// exactly.
pub fn train(dataset: &Dataset, config: &TrainConfig, val: &[LabeledSample]) -> Result<TrainOutcome> {
    config.validate()?;
    let skeleton = &dataset.skeleton;
    skeleton.validate()?;
    if val.is_empty() {
        return Err(Error::EmptyBatch {
            context: "validation set",
        });
    }
    if dataset.labeled.is_empty() {
        return Err(Error::EmptyBatch {
            context: "labeled training set",
        });
    }
    if dataset.labeled.len() < config.batch_labeled {
        return Err(Error::DatasetTooSmall(format!(
            "{} labeled samples, batch needs {}",
            dataset.labeled.len(),
            config.batch_labeled
        )));
    }
    let weak_active = config.uses_unlabeled() && config.iterations > 0;
    if weak_active {
        if dataset.unlabeled.len() < config.batch_unlabeled_groups {
            return Err(Error::DatasetTooSmall(format!(
                "{} multi-view samples, batch needs {} groups",
                dataset.unlabeled.len(),
                config.batch_unlabeled_groups
            )));
        }
        for (i, s) in dataset.unlabeled.iter().enumerate() {
            if s.views.len() < config.group_views {
                return Err(Error::DatasetTooSmall(format!(
                    "multi-view sample {i} has {} views, need {}",
                    s.views.len(),
                    config.group_views
                )));
            }
        }
    }

    let scaler = FeatureScaler::fit(dataset.all_features())?;
    let feature_dim = dataset.labeled[0].features.len();
    let n_joints = skeleton.n_joints();
    let mut dims = vec![feature_dim];
    dims.extend_from_slice(&config.hidden_dims);
    dims.push(3 * n_joints);

    // Separate streams: init, labeled batches (+augmentation), unlabeled
    // group sampling. Keeps the supervised trajectory identical whether or
    // not unlabeled batches are drawn.
    let mut rng_init = ChaCha12Rng::seed_from_u64(config.rng_seed.wrapping_add(0x1));
    let mut rng_labeled = ChaCha12Rng::seed_from_u64(config.rng_seed.wrapping_add(0x2));
    let mut rng_groups = ChaCha12Rng::seed_from_u64(config.rng_seed.wrapping_add(0x3));

    let mut params = RegressorParams::init(&dims, skeleton.root(), &mut rng_init)?;
    let mut adam = AdamState::new(&params);
    let mut gamma = params.clone();
    let mut gamma_iteration = 0u64;
    let mut best_val = f64::INFINITY;
    let mut log = TrainLog::default();

    let pretrain_end = config.pretrain_iterations;
    let total = pretrain_end + config.iterations;
    let intrinsics = dataset.meta.capture.intrinsics;

    let mut last_losses = LossBreakdown::new(0.0, 0.0, 0.0, &config.weights);
    for it in 0..total {
        let in_pretrain = it < pretrain_end;

        // Labeled half of the batch.
        let idx = rand::seq::index::sample(
            &mut rng_labeled,
            dataset.labeled.len(),
            config.batch_labeled,
        );
        let mut labeled_features = Vec::with_capacity(config.batch_labeled);
        let mut labels = Vec::with_capacity(config.batch_labeled);
        for i in idx.iter() {
            let sample = &dataset.labeled[i];
            let (features, label) = if config.augment {
                augment(&sample.features, &sample.pose_mm, &intrinsics, &mut rng_labeled)
            } else {
                (sample.features.clone(), sample.pose_mm.clone())
            };
            labeled_features.push(scaler.apply(&features)?);
            labels.push(label);
        }

        // Unlabeled groups (weak phase only).
        let mut groups = Vec::new();
        if !in_pretrain && weak_active {
            let picks = rand::seq::index::sample(
                &mut rng_groups,
                dataset.unlabeled.len(),
                config.batch_unlabeled_groups,
            );
            for g in picks.iter() {
                let sample = &dataset.unlabeled[g];
                let view_idx: Vec<usize> = if sample.views.len() > config.group_views {
                    rand::seq::index::sample(
                        &mut rng_groups,
                        sample.views.len(),
                        config.group_views,
                    )
                    .iter()
                    .collect()
                } else {
                    (0..sample.views.len()).collect()
                };
                let mut features = Vec::with_capacity(view_idx.len());
                let mut rotations = Vec::with_capacity(view_idx.len());
                let mut have_all_rotations = true;
                for &v in &view_idx {
                    let view = &sample.views[v];
                    features.push(scaler.apply(&view.features)?);
                    match view.rotation {
                        Some(r) => rotations.push(r),
                        None => have_all_rotations = false,
                    }
                }
                let known_rotations = if have_all_rotations {
                    // Re-express relative to the first selected view:
                    // R_first^T R_v maps view v to the first view's frame.
                    let first_inv = rotations[0].inverse();
                    Some(rotations.iter().map(|r| first_inv.compose(r)).collect())
                } else {
                    if config.rotations == RotationSource::Known {
                        return Err(Error::MissingRotations { sample: g });
                    }
                    None
                };
                groups.push(GroupBatch {
                    features,
                    known_rotations,
                });
            }
        }

        let batch = Batch {
            labeled_features,
            labels,
            groups,
        };

        // Log (and snapshot) against the pre-update parameters.
        if it % config.eval_every == 0 || it == pretrain_end {
            let val_err = validation_nmpjpe(&params, &scaler, val)
                .map_err(|e| wrap_degenerate(e, it))?;
            if it <= pretrain_end && val_err < best_val {
                best_val = val_err;
                gamma = params.clone();
                gamma_iteration = it;
            }
            // The loss columns report this iteration's batch below.
            let outcome = train_step(&mut params, &gamma, &batch, &mut adam, skeleton, config)
                .map_err(|e| wrap_degenerate(e, it))?;
            log.skipped_groups += outcome.skipped_groups;
            last_losses = outcome.losses;
            log.rows.push(TrainLogRow {
                iteration: it,
                m: outcome.losses.multiview,
                s: outcome.losses.supervised,
                r: outcome.losses.regularizer,
                total: outcome.losses.total,
                val_nmpjpe: val_err,
            });
        } else {
            let outcome = train_step(&mut params, &gamma, &batch, &mut adam, skeleton, config)
                .map_err(|e| wrap_degenerate(e, it))?;
            log.skipped_groups += outcome.skipped_groups;
            last_losses = outcome.losses;
        }
    }

    // Final evaluation after the last update.
    let final_val =
        validation_nmpjpe(&params, &scaler, val).map_err(|e| wrap_degenerate(e, total))?;
    if total <= pretrain_end && final_val < best_val {
        gamma = params.clone();
        gamma_iteration = total;
    }
    log.rows.push(TrainLogRow {
        iteration: total,
        m: last_losses.multiview,
        s: last_losses.supervised,
        r: last_losses.regularizer,
        total: last_losses.total,
        val_nmpjpe: final_val,
    });

    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(params, scaler.clone(), config.rng_seed, total),
        gamma: Checkpoint::new(gamma, scaler, config.rng_seed, gamma_iteration),
        log,
    })
}

fn wrap_degenerate(e: Error, iteration: u64) -> Error {
    if e.is_numerical() {
        Error::DegeneratePrediction {
            iteration,
            source: Box::new(e),
        }
    } else {
        e
    }
}

/// Runs the network over a labeled set and aggregates all metrics.
pub fn evaluate(
    checkpoint: &Checkpoint,
    eval_set: &[LabeledSample],
    skeleton: &Skeleton,
    pck_threshold_mm: f64,
) -> Result<MetricReport> {
    if eval_set.is_empty() {
        return Err(Error::EmptyBatch {
            context: "evaluation set",
        });
    }
    if checkpoint.params.n_joints() != skeleton.n_joints() {
        return Err(Error::SkeletonMismatch {
            checkpoint: checkpoint.params.n_joints(),
            dataset: skeleton.n_joints(),
        });
    }
    let preds: Vec<Pose> = eval_set
        .iter()
        .map(|s| checkpoint.predict(&s.features))
        .collect::<Result<_>>()?;
    let labels: Vec<Pose> = eval_set.iter().map(|s| s.pose_mm.clone()).collect();
    metrics::evaluate_batch(&preds, &labels, skeleton, pck_threshold_mm)
}

/// Metric report with the labels injected as predictions (sanity oracle:
/// every error metric is zero).
pub fn evaluate_oracle(
    eval_set: &[LabeledSample],
    skeleton: &Skeleton,
    pck_threshold_mm: f64,
) -> Result<MetricReport> {
    if eval_set.is_empty() {
        return Err(Error::EmptyBatch {
            context: "evaluation set",
        });
    }
    let labels: Vec<Pose> = eval_set.iter().map(|s| s.pose_mm.clone()).collect();
    metrics::evaluate_batch(&labels, &labels, skeleton, pck_threshold_mm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, CaptureConfig};

    fn tiny_dataset(noise: f64, seed: u64) -> Dataset {
        let sk = Skeleton::default_human();
        let cfg = CaptureConfig {
            n_subjects: 3,
            frames_per_subject: 12,
            noise_sigma_mm: noise,
            rng_seed: seed,
            ..CaptureConfig::default()
        };
        generate_dataset(&cfg, &sk, &[0]).unwrap()
    }

    fn val_set(noise: f64, seed: u64) -> Vec<LabeledSample> {
        let sk = Skeleton::default_human();
        let cfg = CaptureConfig {
            n_subjects: 2,
            frames_per_subject: 10,
            noise_sigma_mm: noise,
            rng_seed: seed,
            ..CaptureConfig::default()
        };
        generate_dataset(&cfg, &sk, &[0, 1]).unwrap().labeled
    }

    fn quick_config(pretrain: u64, weak: u64) -> TrainConfig {
        TrainConfig {
            pretrain_iterations: pretrain,
            iterations: weak,
            eval_every: 10,
            hidden_dims: vec![16],
            rng_seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn adam_first_step_closed_form() {
        let mut params = RegressorParams::zeros(&[2, 3], 0).unwrap();
        let mut grads = ParamGrads::zeros_like(&params);
        grads.weights[0] = vec![0.5, -2.0, 0.0, 1e-3, 3.0, -0.25];
        grads.biases[0] = vec![1.0, -1.0, 4.0];
        let cfg = TrainConfig::default();
        let mut adam = AdamState::new(&params);
        adam.step(&mut params, &grads, &cfg);
        for (w, g) in params.weights[0].iter().zip(&grads.weights[0]) {
            let expected = -cfg.learning_rate * g / (g.abs() + cfg.adam_eps);
            assert!(
                (w - expected).abs() < 1e-15,
                "first step {w} vs expected {expected}"
            );
        }
        for (b, g) in params.biases[0].iter().zip(&grads.biases[0]) {
            let expected = -cfg.learning_rate * g / (g.abs() + cfg.adam_eps);
            assert!((b - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(70);
        let mut params = RegressorParams::init(&[3, 4, 6], 0, &mut rng).unwrap();
        let before = params.clone();
        let grads = ParamGrads::zeros_like(&params);
        let mut adam = AdamState::new(&params);
        adam.step(&mut params, &grads, &TrainConfig::default());
        assert_eq!(params, before);
    }

    #[test]
    fn zero_iterations_snapshot_is_initial_params() {
        let ds = tiny_dataset(0.0, 1);
        let val = val_set(0.0, 1001);
        let out = train(&ds, &quick_config(0, 0), &val).unwrap();
        assert_eq!(out.checkpoint.params, out.gamma.params);
        assert_eq!(out.gamma.iteration, 0);
        assert_eq!(out.log.rows.len(), 1);
    }

    #[test]
    fn pretraining_improves_validation_on_clean_data() {
        let ds = tiny_dataset(0.0, 42);
        let val = val_set(0.0, 1042);
        let init = train(&ds, &quick_config(0, 0), &val).unwrap();
        let initial_err = init.log.final_val_nmpjpe().unwrap();
        let out = pretrain(&ds, &val, &quick_config(300, 0)).unwrap();
        let trained_err = out.log.final_val_nmpjpe().unwrap();
        assert!(
            trained_err < initial_err,
            "pretraining did not improve: {initial_err} -> {trained_err}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_dataset(5.0, 3);
        let val = val_set(5.0, 1003);
        let cfg = quick_config(20, 20);
        let a = train(&ds, &cfg, &val).unwrap();
        let b = train(&ds, &cfg, &val).unwrap();
        assert_eq!(
            serde_json::to_string(&a.gamma).unwrap(),
            serde_json::to_string(&b.gamma).unwrap()
        );
        assert_eq!(a.log.to_csv(), b.log.to_csv());
    }

    #[test]
    fn supervised_only_weak_phase_equals_pretrain_continuation() {
        let ds = tiny_dataset(5.0, 4);
        let val = val_set(5.0, 1004);
        let mut cfg = quick_config(15, 25);
        cfg.weights = LossWeights {
            supervised: 100.0,
            multiview: 0.0,
            regularizer: 0.0,
        };
        let weak = train(&ds, &cfg, &val).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.pretrain_iterations = 40;
        cfg2.iterations = 0;
        let continued = train(&ds, &cfg2, &val).unwrap();
        assert_eq!(
            serde_json::to_string(&weak.checkpoint.params).unwrap(),
            serde_json::to_string(&continued.checkpoint.params).unwrap()
        );
    }

    #[test]
    fn estimated_rotations_equal_known_when_injected() {
        // Stop-gradient contract: a step with estimated rotations must be
        // bit-identical to a step where those same rotations are supplied
        // as known constants.
        let ds = tiny_dataset(5.0, 5);
        let sk = ds.skeleton.clone();
        let scaler = FeatureScaler::fit(ds.all_features()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let dims = [ds.labeled[0].features.len(), 16, 3 * sk.n_joints()];
        let params0 = RegressorParams::init(&dims, sk.root(), &mut rng).unwrap();

        let labeled_features: Vec<Vec<f64>> = ds.labeled[..8]
            .iter()
            .map(|s| scaler.apply(&s.features).unwrap())
            .collect();
        let labels: Vec<Pose> = ds.labeled[..8].iter().map(|s| s.pose_mm.clone()).collect();
        let group_features: Vec<Vec<f64>> = ds.unlabeled[0]
            .views
            .iter()
            .map(|v| scaler.apply(&v.features).unwrap())
            .collect();

        let mut cfg = quick_config(0, 1);
        cfg.rotations = RotationSource::Estimated;

        // Probe the rotations the estimated path will produce.
        let preds: Vec<Pose> = group_features
            .iter()
            .map(|f| params0.forward(f).unwrap())
            .collect();
        let mut rots = vec![Rotation3::identity()];
        for p in preds.iter().skip(1) {
            rots.push(
                estimate_rotation(p, &preds[0], &sk.torso_set, NormScope::FullPose)
                    .unwrap()
                    .rotation,
            );
        }

        let batch_est = Batch {
            labeled_features: labeled_features.clone(),
            labels: labels.clone(),
            groups: vec![GroupBatch {
                features: group_features.clone(),
                known_rotations: None,
            }],
        };
        let batch_known = Batch {
            labeled_features,
            labels,
            groups: vec![GroupBatch {
                features: group_features,
                known_rotations: Some(rots),
            }],
        };

        let mut params_est = params0.clone();
        let mut adam_est = AdamState::new(&params_est);
        let out_est =
            train_step(&mut params_est, &params0, &batch_est, &mut adam_est, &sk, &cfg).unwrap();

        let mut cfg_known = cfg.clone();
        cfg_known.rotations = RotationSource::Known;
        let mut params_known = params0.clone();
        let mut adam_known = AdamState::new(&params_known);
        let out_known = train_step(
            &mut params_known,
            &params0,
            &batch_known,
            &mut adam_known,
            &sk,
            &cfg_known,
        )
        .unwrap();

        assert_eq!(params_est, params_known);
        assert_eq!(out_est.losses, out_known.losses);
        assert_eq!(out_est.skipped_groups, 0);
    }

    #[test]
    fn evaluate_oracle_gives_zero_errors() {
        let ds = tiny_dataset(10.0, 6);
        let report =
            evaluate_oracle(&ds.labeled, &ds.skeleton, metrics::PCK_THRESHOLD_MM).unwrap();
        assert!(report.mpjpe_mm < 1e-9);
        assert!(report.nmpjpe_mm < 1e-9);
        assert!(report.pmpjpe_mm < 1e-9);
        assert_eq!(report.pck, 1.0);
        assert_eq!(report.npck, 1.0);
        assert!(report.com_hip_mm < 1e-9);
        assert!(report.hip_flexion_deg < 1e-9);
    }

    #[test]
    fn evaluate_rejects_skeleton_mismatch() {
        let ds = tiny_dataset(0.0, 7);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let params = RegressorParams::init(&[4, 6], 0, &mut rng).unwrap();
        let ckpt = Checkpoint::new(params, FeatureScaler::identity(4), 0, 0);
        assert!(matches!(
            evaluate(&ckpt, &ds.labeled, &ds.skeleton, 150.0),
            Err(Error::SkeletonMismatch { .. })
        ));
    }

    #[test]
    fn batch_too_small_fails_loudly() {
        let sk = Skeleton::default_human();
        let cfg = CaptureConfig {
            n_subjects: 2,
            frames_per_subject: 3,
            rng_seed: 11,
            ..CaptureConfig::default()
        };
        let ds = generate_dataset(&cfg, &sk, &[0]).unwrap();
        let val = val_set(0.0, 1011);
        assert!(matches!(
            train(&ds, &quick_config(5, 0), &val),
            Err(Error::DatasetTooSmall(_))
        ));
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = TrainConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        // Partial configs pick up defaults.
        let partial: TrainConfig = serde_json::from_str(r#"{"iterations": 5}"#).unwrap();
        assert_eq!(partial.iterations, 5);
        assert_eq!(partial.batch_labeled, 8);
    }
}
