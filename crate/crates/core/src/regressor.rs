//! Small feed-forward pose regressor with analytic backpropagation.
//!
//! The network maps a flat feature vector to a 3 x N_J pose (flattened
//! row-major), with tanh hidden layers and a linear output that is
//! re-centered at the root joint so every prediction is pelvis-relative
//! by construction.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::pose::Pose;

/// MLP weights. `weights[l]` is row-major `dims[l+1] x dims[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorParams {
    pub layer_dims: Vec<usize>,
    /// Root joint index used for output re-centering.
    pub root: usize,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
}

/// Gradients with the same shapes as [`RegressorParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl RegressorParams {
    /// Random initialization: weight variance inversely proportional to
    /// fan-in, biases zero. Deterministic for a given RNG state.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], root: usize, rng: &mut R) -> Result<Self> {
        validate_dims(layer_dims, root)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_dims.len() - 1 {
            let fan_in = layer_dims[l];
            let fan_out = layer_dims[l + 1];
            let std = (1.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * std)
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(RegressorParams {
            layer_dims: layer_dims.to_vec(),
            root,
            weights,
            biases,
        })
    }

    /// All-zero parameters (predicts the zero pose for any input).
    pub fn zeros(layer_dims: &[usize], root: usize) -> Result<Self> {
        validate_dims(layer_dims, root)?;
        let weights = (0..layer_dims.len() - 1)
            .map(|l| vec![0.0; layer_dims[l] * layer_dims[l + 1]])
            .collect();
        let biases = (0..layer_dims.len() - 1)
            .map(|l| vec![0.0; layer_dims[l + 1]])
            .collect();
        Ok(RegressorParams {
            layer_dims: layer_dims.to_vec(),
            root,
            weights,
            biases,
        })
    }

    pub fn n_joints(&self) -> usize {
        self.layer_dims.last().unwrap() / 3
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Forward pass: network output reshaped to a pose and re-centered at
    /// the root joint.
    pub fn forward(&self, features: &[f64]) -> Result<Pose> {
        let activations = self.forward_activations(features)?;
        self.output_to_pose(activations.last().unwrap())
    }

    fn output_to_pose(&self, out: &[f64]) -> Result<Pose> {
        let pose = Pose::from_flat(out)?;
        Ok(pose.centered(self.root))
    }

    /// Activations per layer: `[input, h_1, ..., output]`. Hidden layers
    /// are tanh, the last layer is linear.
    fn forward_activations(&self, features: &[f64]) -> Result<Vec<Vec<f64>>> {
        if features.len() != self.input_dim() {
            return Err(Error::FeatureMismatch {
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        if !features.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "regressor input",
            });
        }
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(features.to_vec());
        for l in 0..self.n_layers() {
            let (rows, cols) = (self.layer_dims[l + 1], self.layer_dims[l]);
            let input = &acts[l];
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &w[i * cols..(i + 1) * cols];
                let mut acc = 0.0;
                for (wij, xj) in row.iter().zip(input) {
                    acc += wij * xj;
                }
                *zi += acc;
            }
            debug_assert_eq!(z.len(), rows);
            let is_output_layer = l == self.n_layers() - 1;
            if !is_output_layer {
                for zi in z.iter_mut() {
                    *zi = zi.tanh();
                }
            }
            if !z.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite {
                    context: "regressor activations",
                });
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// Exact reverse-mode gradients of `<pose_output, output_gradient>`
    /// with respect to every parameter, including the re-centering step.
    pub fn backward(&self, features: &[f64], output_gradient: &[Vec3]) -> Result<ParamGrads> {
        if output_gradient.len() != self.n_joints() {
            return Err(Error::ShapeMismatch {
                expected: self.n_joints(),
                got: output_gradient.len(),
            });
        }
        let acts = self.forward_activations(features)?;

        // Pull the gradient back through the re-centering: subtracting the
        // root column means the root's raw output receives minus the sum
        // of all other columns' gradients (its own centered output is
        // identically zero).
        let n = self.n_joints();
        let mut g = vec![0.0f64; 3 * n];
        for coord in 0..3 {
            let mut colsum = 0.0;
            for j in 0..n {
                if j != self.root {
                    let v = output_gradient[j][coord];
                    g[coord * n + j] = v;
                    colsum += v;
                }
            }
            g[coord * n + self.root] = -colsum;
        }

        let mut grads = ParamGrads {
            weights: self
                .weights
                .iter()
                .map(|w| vec![0.0; w.len()])
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };

        let mut delta = g;
        for l in (0..self.n_layers()).rev() {
            let cols = self.layer_dims[l];
            let input = &acts[l];
            let gw = &mut grads.weights[l];
            for (i, di) in delta.iter().enumerate() {
                let row = &mut gw[i * cols..(i + 1) * cols];
                for (gwij, xj) in row.iter_mut().zip(input) {
                    *gwij += di * xj;
                }
            }
            grads.biases[l].copy_from_slice(&delta);
            if l > 0 {
                // delta_prev = W^T delta, times tanh'(z) = 1 - h^2.
                let w = &self.weights[l];
                let mut prev = vec![0.0f64; cols];
                for (i, di) in delta.iter().enumerate() {
                    let row = &w[i * cols..(i + 1) * cols];
                    for (p, wij) in prev.iter_mut().zip(row) {
                        *p += di * wij;
                    }
                }
                for (p, h) in prev.iter_mut().zip(&acts[l]) {
                    *p *= 1.0 - h * h;
                }
                delta = prev;
            }
        }
        Ok(grads)
    }

    /// In-place `self -= update` with matching shapes.
    pub fn apply_update(&mut self, update: &ParamGrads) {
        for (w, u) in self.weights.iter_mut().zip(&update.weights) {
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= ui;
            }
        }
        for (b, u) in self.biases.iter_mut().zip(&update.biases) {
            for (bi, ui) in b.iter_mut().zip(u) {
                *bi -= ui;
            }
        }
    }

    /// Iterate all parameters (weights then biases, layer by layer).
    pub fn for_each_param(&self, mut f: impl FnMut(f64)) {
        for w in &self.weights {
            w.iter().for_each(|&x| f(x));
        }
        for b in &self.biases {
            b.iter().for_each(|&x| f(x));
        }
    }
}

impl ParamGrads {
    pub fn zeros_like(params: &RegressorParams) -> Self {
        ParamGrads {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `self += scale * other`.
    pub fn accumulate(&mut self, other: &ParamGrads, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += scale * bi;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += scale * bi;
            }
        }
    }

    pub fn is_all_zero(&self) -> bool {
        self.weights.iter().flatten().all(|&x| x == 0.0)
            && self.biases.iter().flatten().all(|&x| x == 0.0)
    }
}

fn validate_dims(layer_dims: &[usize], root: usize) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidConfig(
            "regressor needs at least input and output dims".into(),
        ));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidConfig("zero-width regressor layer".into()));
    }
    let out = *layer_dims.last().unwrap();
    if out % 3 != 0 {
        return Err(Error::InvalidConfig(format!(
            "output dim {out} is not a multiple of 3"
        )));
    }
    if root >= out / 3 {
        return Err(Error::InvalidConfig(format!(
            "root joint {root} out of range for {} joints",
            out / 3
        )));
    }
    Ok(())
}

/// Per-dimension input standardization fitted on the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    /// Identity scaler (mean 0, std 1).
    pub fn identity(dim: usize) -> Self {
        FeatureScaler {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit<'a, I>(features: I) -> Result<FeatureScaler>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = features.into_iter();
        let first = iter.next().ok_or(Error::EmptyBatch {
            context: "feature scaler fit",
        })?;
        let dim = first.len();
        let mut sum = vec![0.0f64; dim];
        let mut sumsq = vec![0.0f64; dim];
        let mut count = 0usize;
        for f in std::iter::once(first).chain(iter) {
            if f.len() != dim {
                return Err(Error::FeatureMismatch {
                    expected: dim,
                    got: f.len(),
                });
            }
            for (i, &x) in f.iter().enumerate() {
                sum[i] += x;
                sumsq[i] += x * x;
            }
            count += 1;
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std: Vec<f64> = sumsq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| ((sq / n - m * m).max(0.0)).sqrt().max(1e-8))
            .collect();
        Ok(FeatureScaler { mean, std })
    }

    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.mean.len() {
            return Err(Error::FeatureMismatch {
                expected: self.mean.len(),
                got: features.len(),
            });
        }
        Ok(features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

/// Serialized network state: parameters, input scaler, and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub params: RegressorParams,
    pub scaler: FeatureScaler,
    pub seed: u64,
    pub iteration: u64,
}

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(params: RegressorParams, scaler: FeatureScaler, seed: u64, iteration: u64) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            params,
            scaler,
            seed,
            iteration,
        }
    }

    /// Forward pass through scaler and network.
    pub fn predict(&self, features: &[f64]) -> Result<Pose> {
        self.params.forward(&self.scaler.apply(features)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let ckpt: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                expected: CHECKPOINT_FORMAT_VERSION,
                got: ckpt.format_version,
            });
        }
        validate_dims(&ckpt.params.layer_dims, ckpt.params.root)?;
        Ok(ckpt)
    }
}
