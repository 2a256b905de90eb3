//! Joint topology, bone lengths, and body segment weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index triples for flexion-angle measurements: knee triples are
/// (hip, knee, ankle), hip triples are (shoulder, hip, knee).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlexionTriples {
    pub knee: Vec<[usize; 3]>,
    pub hip: Vec<[usize; 3]>,
}

/// Kinematic tree rooted at the pelvis, immutable after construction.
///
/// The parent array encodes the tree (the root is its own parent);
/// `bone_lengths_mm[j]` is the length of the bone from `parent[j]` to `j`
/// (unused for the root); `segment_weights` are nonnegative mass fractions
/// summing to 1. The shipped defaults for segment weights are plausible
/// averages, not measured values; experiments that care should supply
/// their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub names: Vec<String>,
    pub parent: Vec<usize>,
    pub bone_lengths_mm: Vec<f64>,
    pub torso_set: Vec<usize>,
    pub segment_weights: Vec<f64>,
    #[serde(default)]
    pub limb_pairs: Option<FlexionTriples>,
}

const DEFAULT_SKELETON: &str = include_str!("../data/skeleton17.json");

impl Skeleton {
    /// The built-in 17-joint human skeleton.
    pub fn default_human() -> Skeleton {
        let sk: Skeleton =
            serde_json::from_str(DEFAULT_SKELETON).expect("built-in skeleton parses");
        sk.validate().expect("built-in skeleton is valid");
        sk
    }

    pub fn from_json(json: &str) -> Result<Skeleton> {
        let sk: Skeleton = serde_json::from_str(json)?;
        sk.validate()?;
        Ok(sk)
    }

    pub fn load(path: &Path) -> Result<Skeleton> {
        Skeleton::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n_joints(&self) -> usize {
        self.names.len()
    }

    /// Index of the root (pelvis) joint: the unique self-parented entry.
    pub fn root(&self) -> usize {
        (0..self.n_joints())
            .find(|&j| self.parent[j] == j)
            .unwrap_or(0)
    }

    /// Joints ordered so every parent precedes its children.
    pub fn traversal_order(&self) -> Vec<usize> {
        let n = self.n_joints();
        let root = self.root();
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        order.push(root);
        visited[root] = true;
        // n passes suffice for any tree; validation guarantees one exists.
        while order.len() < n {
            let before = order.len();
            for j in 0..n {
                if !visited[j] && visited[self.parent[j]] {
                    visited[j] = true;
                    order.push(j);
                }
            }
            if order.len() == before {
                break;
            }
        }
        order
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_joints();
        let fail = |msg: String| Err(Error::InvalidSkeleton(msg));
        if n == 0 {
            return fail("no joints".into());
        }
        if self.parent.len() != n || self.bone_lengths_mm.len() != n || self.segment_weights.len() != n
        {
            return fail(format!(
                "field lengths disagree: {} names, {} parents, {} bone lengths, {} weights",
                n,
                self.parent.len(),
                self.bone_lengths_mm.len(),
                self.segment_weights.len()
            ));
        }
        let roots: Vec<usize> = (0..n).filter(|&j| self.parent[j] == j).collect();
        if roots.len() != 1 {
            return fail(format!("expected exactly one root joint, found {:?}", roots));
        }
        if self.parent.iter().any(|&p| p >= n) {
            return fail("parent index out of range".into());
        }
        if self.traversal_order().len() != n {
            return fail("parent array contains a cycle".into());
        }
        let root = roots[0];
        for j in 0..n {
            if j != root && self.bone_lengths_mm[j] <= 0.0 {
                return fail(format!("bone length for joint {j} must be positive"));
            }
        }
        if self.segment_weights.iter().any(|&w| w < 0.0) {
            return fail("segment weights must be nonnegative".into());
        }
        let wsum: f64 = self.segment_weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-9 {
            return fail(format!("segment weights sum to {wsum}, expected 1"));
        }
        if self.torso_set.len() < 3 {
            return fail("torso set needs at least 3 joints".into());
        }
        let mut torso_sorted = self.torso_set.clone();
        torso_sorted.sort_unstable();
        torso_sorted.dedup();
        if torso_sorted.len() != self.torso_set.len() || self.torso_set.iter().any(|&j| j >= n) {
            return fail("torso set has duplicate or out-of-range joints".into());
        }
        if let Some(triples) = &self.limb_pairs {
            for t in triples.knee.iter().chain(triples.hip.iter()) {
                if t.iter().any(|&j| j >= n) {
                    return fail(format!("limb triple {t:?} out of range"));
                }
            }
        }
        Ok(())
    }

    /// Left/right hip joint indices, taken from the knee flexion triples.
    pub fn hip_indices(&self) -> Result<Vec<usize>> {
        let triples = self.limb_pairs.as_ref().ok_or(Error::MissingLimbIndices)?;
        if triples.knee.is_empty() {
            return Err(Error::MissingLimbIndices);
        }
        Ok(triples.knee.iter().map(|t| t[0]).collect())
    }

    /// Left/right ankle joint indices, taken from the knee flexion triples.
    pub fn ankle_indices(&self) -> Result<Vec<usize>> {
        let triples = self.limb_pairs.as_ref().ok_or(Error::MissingLimbIndices)?;
        if triples.knee.is_empty() {
            return Err(Error::MissingLimbIndices);
        }
        Ok(triples.knee.iter().map(|t| t[2]).collect())
    }
}
