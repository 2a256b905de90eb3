//! Pelvis-relative 3D pose representation and basic pose operations.
//!
//! A pose is a 3 x N_J matrix of joint positions in millimetres, stored
//! column-per-joint. Serialized form is the flat row-major array
//! `[x_0..x_{N-1}, y_0..y_{N-1}, z_0..z_{N-1}]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::rotation::Rotation3;
use crate::skeleton::Skeleton;

/// Poses with Frobenius norm below this (in mm) are degenerate for any
/// scale-normalized computation.
pub const DEGENERATE_NORM_MM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pose {
    joints: Vec<Vec3>,
}

impl Pose {
    pub fn from_columns(joints: Vec<Vec3>) -> Result<Self> {
        for c in &joints {
            if !c.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite { context: "pose joints" });
            }
        }
        Ok(Pose { joints })
    }

    pub fn zeros(n_joints: usize) -> Self {
        Pose {
            joints: vec![[0.0; 3]; n_joints],
        }
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joint(&self, k: usize) -> Vec3 {
        self.joints[k]
    }

    pub fn joints(&self) -> &[Vec3] {
        &self.joints
    }

    /// Frobenius norm of the joint matrix, in mm.
    pub fn norm(&self) -> f64 {
        self.joints
            .iter()
            .map(|c| linalg::dot(*c, *c))
            .sum::<f64>()
            .sqrt()
    }

    /// Flattened inner product with another pose of the same shape.
    pub fn dot(&self, other: &Pose) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .joints
            .iter()
            .zip(&other.joints)
            .map(|(a, b)| linalg::dot(*a, *b))
            .sum())
    }

    pub fn scaled(&self, s: f64) -> Pose {
        Pose {
            joints: self.joints.iter().map(|c| linalg::scale(*c, s)).collect(),
        }
    }

    /// Column-wise rotation `R * p`.
    pub fn rotated(&self, r: &Rotation3) -> Pose {
        Pose {
            joints: self.joints.iter().map(|c| r.apply(*c)).collect(),
        }
    }

    /// Translates all joints so the column at `root` becomes exactly zero.
    pub fn centered(&self, root: usize) -> Pose {
        let origin = self.joints[root];
        Pose {
            joints: self
                .joints
                .iter()
                .map(|c| linalg::sub(*c, origin))
                .collect(),
        }
    }

    /// Element-wise mean of poses, re-centered at `root`. Errors on an
    /// empty list or mismatched shapes.
    pub fn mean(poses: &[&Pose], root: usize) -> Result<Pose> {
        let first = poses.first().ok_or(Error::EmptyBatch {
            context: "pose mean",
        })?;
        let n = first.n_joints();
        let mut acc = vec![[0.0f64; 3]; n];
        for p in poses {
            first.check_shape(p)?;
            for (a, c) in acc.iter_mut().zip(&p.joints) {
                *a = linalg::add(*a, *c);
            }
        }
        let inv = 1.0 / poses.len() as f64;
        let mean = Pose {
            joints: acc.iter().map(|a| linalg::scale(*a, inv)).collect(),
        };
        Ok(mean.centered(root))
    }

    pub fn check_shape(&self, other: &Pose) -> Result<()> {
        if self.n_joints() != other.n_joints() {
            return Err(Error::ShapeMismatch {
                expected: self.n_joints(),
                got: other.n_joints(),
            });
        }
        Ok(())
    }

    /// Errors with `DegeneratePose` when the norm is at or below
    /// [`DEGENERATE_NORM_MM`]; otherwise returns the norm.
    pub fn checked_norm(&self, context: &'static str) -> Result<f64> {
        let n = self.norm();
        if n <= DEGENERATE_NORM_MM {
            return Err(Error::DegeneratePose {
                context,
                norm: n,
                threshold: DEGENERATE_NORM_MM,
            });
        }
        Ok(n)
    }

    /// Flat row-major view `[xs..., ys..., zs...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let n = self.n_joints();
        let mut out = vec![0.0; 3 * n];
        for (j, c) in self.joints.iter().enumerate() {
            out[j] = c[0];
            out[n + j] = c[1];
            out[2 * n + j] = c[2];
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::ShapeMismatch {
                expected: (flat.len() / 3 + 1) * 3,
                got: flat.len(),
            });
        }
        let n = flat.len() / 3;
        let joints = (0..n)
            .map(|j| [flat[j], flat[n + j], flat[2 * n + j]])
            .collect();
        Pose::from_columns(joints)
    }
}

impl TryFrom<Vec<f64>> for Pose {
    type Error = Error;
    fn try_from(flat: Vec<f64>) -> Result<Self> {
        Pose::from_flat(&flat)
    }
}

impl From<Pose> for Vec<f64> {
    fn from(p: Pose) -> Vec<f64> {
        p.to_flat()
    }
}

/// Expresses raw joint positions relative to the skeleton's pelvis joint.
pub fn center_at_pelvis(raw_joints: &[Vec3], skeleton: &Skeleton) -> Result<Pose> {
    if raw_joints.len() != skeleton.n_joints() {
        return Err(Error::ShapeMismatch {
            expected: skeleton.n_joints(),
            got: raw_joints.len(),
        });
    }
    let pose = Pose::from_columns(raw_joints.to_vec())?;
    Ok(pose.centered(skeleton.root()))
}

/// Rescales every bone to the skeleton's target length, preserving bone
/// directions and translating child subtrees rigidly.
///
/// Mirrors the post-processing used to clean up click-annotated captures,
/// where joint positions are noisy but limb lengths are known.
pub fn normalize_bone_lengths(pose: &Pose, skeleton: &Skeleton) -> Result<Pose> {
    if pose.n_joints() != skeleton.n_joints() {
        return Err(Error::ShapeMismatch {
            expected: skeleton.n_joints(),
            got: pose.n_joints(),
        });
    }
    let root = skeleton.root();
    let mut out = vec![[0.0f64; 3]; pose.n_joints()];
    out[root] = pose.joint(root);
    for j in skeleton.traversal_order() {
        if j == root {
            continue;
        }
        let parent = skeleton.parent[j];
        let dir = linalg::sub(pose.joint(j), pose.joint(parent));
        let len = linalg::norm(dir);
        if len <= 0.0 {
            return Err(Error::DegenerateBone {
                joint: j,
                name: skeleton.names[j].clone(),
            });
        }
        let target = skeleton.bone_lengths_mm[j];
        out[j] = linalg::add(out[parent], linalg::scale(dir, target / len));
    }
    Ok(Pose { joints: out }.centered(root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::Skeleton;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_pose(n: usize, rng: &mut ChaCha12Rng) -> Pose {
        let joints = (0..n)
            .map(|_| [rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)])
            .collect();
        Pose::from_columns(joints).unwrap()
    }

    #[test]
    fn centering_constant_pose_gives_zero() {
        let sk = Skeleton::default_human();
        let raw = vec![[5.0, 5.0, 5.0]; sk.n_joints()];
        let p = center_at_pelvis(&raw, &sk).unwrap();
        assert!(p.norm() == 0.0);
    }

    #[test]
    fn centering_is_idempotent() {
        let sk = Skeleton::default_human();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let raw: Vec<Vec3> = (0..sk.n_joints())
            .map(|_| [rng.gen_range(-1.0..1.0) * 800.0, rng.gen(), rng.gen()])
            .collect();
        let once = center_at_pelvis(&raw, &sk).unwrap();
        let twice = center_at_pelvis(once.joints(), &sk).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.joint(sk.root()), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn centering_preserves_already_centered() {
        let sk = Skeleton::default_human();
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let p = random_pose(sk.n_joints(), &mut rng).centered(sk.root());
        let again = center_at_pelvis(p.joints(), &sk).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn norm_matches_bruteforce() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let p = random_pose(9, &mut rng);
        let brute: f64 = p
            .joints()
            .iter()
            .flat_map(|c| c.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        assert!((p.norm() - brute).abs() < 1e-12);
    }

    #[test]
    fn norm_simple_cases() {
        let mut p = Pose::zeros(4);
        assert_eq!(p.norm(), 0.0);
        p.joints[2] = [3.0, 4.0, 0.0];
        assert_eq!(p.norm(), 5.0);
    }

    #[test]
    fn norm_is_absolutely_homogeneous() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let p = random_pose(7, &mut rng);
        for a in [-2.5, 0.0, 0.3, 4.0] {
            assert!((p.scaled(a).norm() - a.abs() * p.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn bone_normalization_restores_uniform_scaling() {
        let sk = Skeleton::default_human();
        let rest = crate::synth::rest_pose(&sk).unwrap();
        let doubled = rest.scaled(2.0);
        let restored = normalize_bone_lengths(&doubled, &sk).unwrap();
        for j in 0..sk.n_joints() {
            let d = linalg::norm(linalg::sub(restored.joint(j), rest.joint(j)));
            assert!(d < 1e-9, "joint {j} off by {d}");
        }
    }

    #[test]
    fn bone_normalization_hits_targets_and_is_idempotent() {
        let sk = Skeleton::default_human();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let rest = crate::synth::rest_pose(&sk).unwrap();
        // Perturb all joints, then normalize.
        let joints: Vec<Vec3> = rest
            .joints()
            .iter()
            .map(|c| {
                [
                    c[0] + rng.gen_range(-60.0..60.0),
                    c[1] + rng.gen_range(-60.0..60.0),
                    c[2] + rng.gen_range(-60.0..60.0),
                ]
            })
            .collect();
        let noisy = center_at_pelvis(&joints, &sk).unwrap();
        let fixed = normalize_bone_lengths(&noisy, &sk).unwrap();
        for j in 0..sk.n_joints() {
            if j == sk.root() {
                continue;
            }
            let len = linalg::norm(linalg::sub(fixed.joint(j), fixed.joint(sk.parent[j])));
            assert!((len - sk.bone_lengths_mm[j]).abs() < 1e-9);
            // Direction preserved.
            let before = linalg::sub(noisy.joint(j), noisy.joint(sk.parent[j]));
            let after = linalg::sub(fixed.joint(j), fixed.joint(sk.parent[j]));
            let cosine = linalg::dot(before, after) / (linalg::norm(before) * linalg::norm(after));
            assert!(cosine > 1.0 - 1e-12);
        }
        let again = normalize_bone_lengths(&fixed, &sk).unwrap();
        for j in 0..sk.n_joints() {
            assert!(linalg::norm(linalg::sub(again.joint(j), fixed.joint(j))) < 1e-9);
        }
    }

    #[test]
    fn bone_normalization_identity_when_already_normalized() {
        let sk = Skeleton::default_human();
        let rest = crate::synth::rest_pose(&sk).unwrap();
        let out = normalize_bone_lengths(&rest, &sk).unwrap();
        for j in 0..sk.n_joints() {
            assert!(linalg::norm(linalg::sub(out.joint(j), rest.joint(j))) < 1e-9);
        }
    }

    #[test]
    fn bone_normalization_names_degenerate_joint() {
        let sk = Skeleton::default_human();
        let rest = crate::synth::rest_pose(&sk).unwrap();
        let mut joints = rest.joints().to_vec();
        joints[4] = joints[3]; // head collapses onto neck
        let p = Pose::from_columns(joints).unwrap();
        match normalize_bone_lengths(&p, &sk) {
            Err(Error::DegenerateBone { joint, name }) => {
                assert_eq!(joint, 4);
                assert_eq!(name, "head");
            }
            other => panic!("expected degenerate bone, got {other:?}"),
        }
    }

    #[test]
    fn flat_roundtrip_is_row_major() {
        let p = Pose::from_columns(vec![[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(p.to_flat(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(Pose::from_flat(&p.to_flat()).unwrap(), p);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Pose::from_columns(vec![[f64::NAN, 0.0, 0.0]]).is_err());
    }
}
