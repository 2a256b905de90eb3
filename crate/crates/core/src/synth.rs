//! Synthetic multi-view capture simulator.
//!
//! Stands in for a real multi-camera recording rig: poses are sampled by
//! forward kinematics, viewed by a ring of (optionally pan-tilt) cameras,
//! annotated with isotropic 3D noise, cleaned up by bone-length
//! normalization, and observed as projected 2D keypoints. Features are
//! noisy 2D keypoints rather than images, which keeps the monocular
//! depth/scale ambiguity while staying cheap to regress from.
//!
//! All generation is a pure function of (config, seed).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::pose::{center_at_pelvis, normalize_bone_lengths, Pose};
use crate::rotation::Rotation3;
use crate::skeleton::Skeleton;

/// Translation along the view axis applied before projection, in mm.
/// Large enough that every joint of a human-scale pose keeps positive
/// depth under any camera orientation.
pub const CAMERA_STANDOFF_MM: f64 = 5000.0;

/// Pan/tilt bound for per-frame camera motion, degrees.
pub const PTZ_BOUND_DEG: f64 = 30.0;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    pub principal_px: [f64; 2],
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            focal_px: 1200.0,
            principal_px: [0.0, 0.0],
        }
    }
}

/// Whether camera orientations are fixed for the whole capture or drawn
/// fresh every frame (pan-tilt rig following the subject).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationModel {
    Static,
    PerFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureConfig {
    pub n_cameras: usize,
    pub n_subjects: usize,
    pub frames_per_subject: usize,
    /// Std-dev of the isotropic 3D annotation noise, mm.
    pub noise_sigma_mm: f64,
    pub rotation_model: RotationModel,
    pub intrinsics: CameraIntrinsics,
    /// Bound on the random per-joint rotations when sampling poses, degrees.
    pub pose_angle_deg: f64,
    /// Bound on the fixed per-subject joint-angle offsets, degrees. Each
    /// subject moves around its own base posture, so subjects are
    /// statistically distinguishable (as different people performing
    /// different motions are).
    pub style_angle_deg: f64,
    pub rng_seed: u64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            n_cameras: 4,
            n_subjects: 5,
            frames_per_subject: 64,
            noise_sigma_mm: 23.0,
            rotation_model: RotationModel::Static,
            intrinsics: CameraIntrinsics::default(),
            pose_angle_deg: 15.0,
            style_angle_deg: 20.0,
            rng_seed: 0,
        }
    }
}

impl CaptureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cameras < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 cameras, got {}",
                self.n_cameras
            )));
        }
        if self.n_subjects == 0 || self.frames_per_subject == 0 {
            return Err(Error::InvalidConfig("empty capture".into()));
        }
        if self.noise_sigma_mm < 0.0 || !self.noise_sigma_mm.is_finite() {
            return Err(Error::InvalidConfig("noise sigma must be >= 0".into()));
        }
        if self.intrinsics.focal_px <= 0.0 {
            return Err(Error::InvalidConfig("focal length must be positive".into()));
        }
        if self.pose_angle_deg < 0.0 || self.style_angle_deg < 0.0 {
            return Err(Error::InvalidConfig("pose angle bounds must be >= 0".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CaptureConfig> {
        let cfg: CaptureConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One camera's view of a time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub camera: usize,
    /// Projected 2D keypoints, row-major `[u_0..u_{N-1}, v_0..v_{N-1}]`.
    pub features: Vec<f64>,
    /// Annotated pose in this view's frame (pelvis-relative, mm).
    pub pose_mm: Pose,
    /// Rotation taking this view's frame to view 0's frame. Present when
    /// the rig calibration is known; training may ignore it to exercise
    /// the estimated-rotation path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Rotation3>,
}

/// Synchronized views of one subject at one time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewSample {
    pub subject: usize,
    pub frame: usize,
    pub views: Vec<View>,
}

/// A single-view sample with its annotated pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub subject: usize,
    pub frame: usize,
    pub camera: usize,
    pub features: Vec<f64>,
    pub pose_mm: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub capture: CaptureConfig,
    pub labeled_subject_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub format_version: u32,
    pub skeleton: Skeleton,
    pub meta: DatasetMeta,
    pub labeled: Vec<LabeledSample>,
    pub unlabeled: Vec<MultiViewSample>,
}

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let ds: Dataset = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ds.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                expected: DATASET_FORMAT_VERSION,
                got: ds.format_version,
            });
        }
        ds.skeleton.validate()?;
        Ok(ds)
    }

    /// All feature vectors in deterministic order (labeled, then each
    /// unlabeled sample's views).
    pub fn all_features(&self) -> impl Iterator<Item = &[f64]> {
        self.labeled
            .iter()
            .map(|s| s.features.as_slice())
            .chain(
                self.unlabeled
                    .iter()
                    .flat_map(|s| s.views.iter().map(|v| v.features.as_slice())),
            )
    }
}

/// Rest-pose unit direction for a canonically named joint (from its
/// parent), or an error for unknown names.
fn rest_direction(name: &str) -> Result<Vec3> {
    let dir = match name {
        "spine" | "chest" | "neck" | "head" => [0.0, 1.0, 0.0],
        "left_shoulder" | "left_elbow" | "left_wrist" | "left_hip" => [1.0, 0.0, 0.0],
        "right_shoulder" | "right_elbow" | "right_wrist" | "right_hip" => [-1.0, 0.0, 0.0],
        "left_knee" | "left_ankle" | "right_knee" | "right_ankle" => [0.0, -1.0, 0.0],
        other => {
            return Err(Error::InvalidSkeleton(format!(
                "no canonical rest direction for joint '{other}'"
            )))
        }
    };
    Ok(dir)
}

/// Canonical rest pose for a skeleton with canonical joint names:
/// T-pose facing +z, y up, pelvis at the origin.
pub fn rest_pose(skeleton: &Skeleton) -> Result<Pose> {
    let root = skeleton.root();
    let mut pos = vec![[0.0f64; 3]; skeleton.n_joints()];
    for &j in &skeleton.traversal_order() {
        if j == root {
            continue;
        }
        let dir = rest_direction(&skeleton.names[j])?;
        let parent = skeleton.parent[j];
        pos[j] = linalg::add(pos[parent], linalg::scale(dir, skeleton.bone_lengths_mm[j]));
    }
    Pose::from_columns(pos)
}

/// Random rotation about a uniform axis with angle uniform in
/// `[-max_angle_rad, max_angle_rad]`. Identity when the bound is zero.
fn random_bounded_rotation<R: Rng + ?Sized>(max_angle_rad: f64, rng: &mut R) -> Rotation3 {
    let axis: Vec3 = loop {
        let a: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        if linalg::norm(a) > 1e-9 {
            break a;
        }
    };
    let angle = if max_angle_rad > 0.0 {
        rng.gen_range(-max_angle_rad..max_angle_rad)
    } else {
        0.0
    };
    Rotation3::from_axis_angle(axis, angle)
}

/// Per-joint base posture offsets for one subject.
pub fn subject_style<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    style_angle_rad: f64,
    rng: &mut R,
) -> Vec<Rotation3> {
    (0..skeleton.n_joints())
        .map(|_| random_bounded_rotation(style_angle_rad, rng))
        .collect()
}

/// Samples a pose by perturbing the rest pose with bounded random
/// rotations at every joint (the root rotation randomizes global
/// orientation). Bone lengths are preserved exactly by construction.
pub fn sample_pose<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    max_angle_rad: f64,
    rng: &mut R,
) -> Result<Pose> {
    let identity = vec![Rotation3::identity(); skeleton.n_joints()];
    sample_pose_styled(skeleton, &identity, max_angle_rad, rng)
}

/// Like [`sample_pose`] but each joint's perturbation composes onto a
/// fixed per-subject style rotation, so frames of one subject scatter
/// around that subject's own base posture.
pub fn sample_pose_styled<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    style: &[Rotation3],
    max_angle_rad: f64,
    rng: &mut R,
) -> Result<Pose> {
    let root = skeleton.root();
    let n = skeleton.n_joints();
    if style.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: style.len(),
        });
    }
    let mut pos = vec![[0.0f64; 3]; n];
    let mut acc: Vec<Rotation3> = vec![Rotation3::identity(); n];
    for &j in &skeleton.traversal_order() {
        let local = style[j].compose(&random_bounded_rotation(max_angle_rad, rng));
        if j == root {
            acc[j] = local;
            continue;
        }
        let parent = skeleton.parent[j];
        acc[j] = acc[parent].compose(&local);
        let dir = rest_direction(&skeleton.names[j])?;
        let bone = linalg::scale(dir, skeleton.bone_lengths_mm[j]);
        pos[j] = linalg::add(pos[parent], acc[j].apply(bone));
    }
    Pose::from_columns(pos)
}

/// Expresses a reference-frame pose in each camera's frame. `rotations[c]`
/// maps view c to the reference (view 0) frame, so `rotations[0]` must be
/// the identity and the returned poses satisfy `R_c * view_c == reference`.
pub fn make_views(reference: &Pose, rotations: &[Rotation3]) -> Result<Vec<Pose>> {
    let first = rotations.first().ok_or(Error::EmptyBatch {
        context: "make_views rotations",
    })?;
    if first.deviation_from_identity() > 1e-12 {
        return Err(Error::InvalidConfig(
            "first camera rotation must be the identity".into(),
        ));
    }
    Ok(rotations
        .iter()
        .map(|r| reference.rotated(&r.inverse()))
        .collect())
}

/// Adds isotropic Gaussian noise (std `sigma_mm`) to every joint.
pub fn perturb_joints<R: Rng + ?Sized>(pose: &Pose, sigma_mm: f64, rng: &mut R) -> Vec<Vec3> {
    pose.joints()
        .iter()
        .map(|c| {
            [
                c[0] + sigma_mm * rng.sample::<f64, _>(StandardNormal),
                c[1] + sigma_mm * rng.sample::<f64, _>(StandardNormal),
                c[2] + sigma_mm * rng.sample::<f64, _>(StandardNormal),
            ]
        })
        .collect()
}

/// Pinhole projection of view-frame joints after the fixed standoff
/// translation. Output is row-major `[u_0..u_{N-1}, v_0..v_{N-1}]`.
pub fn project(joints: &[Vec3], intrinsics: &CameraIntrinsics) -> Result<Vec<f64>> {
    let n = joints.len();
    let mut out = vec![0.0f64; 2 * n];
    for (j, c) in joints.iter().enumerate() {
        let depth = c[2] + CAMERA_STANDOFF_MM;
        if depth <= 0.0 {
            return Err(Error::JointBehindCamera { joint: j, depth });
        }
        out[j] = intrinsics.focal_px * c[0] / depth + intrinsics.principal_px[0];
        out[n + j] = intrinsics.focal_px * c[1] / depth + intrinsics.principal_px[1];
    }
    Ok(out)
}

/// Noisy observation of a view-frame pose: 3D annotation noise followed by
/// pinhole projection.
pub fn observe<R: Rng + ?Sized>(
    view_pose: &Pose,
    intrinsics: &CameraIntrinsics,
    noise_sigma_mm: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let noisy = perturb_joints(view_pose, noise_sigma_mm, rng);
    project(&noisy, intrinsics)
}

/// In-image-plane augmentation with explicit parameters: rotation by
/// `angle_rad` about the principal point and scaling by `scale`, applied
/// consistently to the 2D features (about the principal point) and to the
/// 3D label (rotation about the view axis, uniform scale).
pub fn augment_with(
    features: &[f64],
    label: &Pose,
    intrinsics: &CameraIntrinsics,
    angle_rad: f64,
    scale: f64,
) -> (Vec<f64>, Pose) {
    let n = features.len() / 2;
    let (s, c) = angle_rad.sin_cos();
    let [px, py] = intrinsics.principal_px;
    let mut out = vec![0.0f64; features.len()];
    for j in 0..n {
        let du = features[j] - px;
        let dv = features[n + j] - py;
        out[j] = scale * (c * du - s * dv) + px;
        out[n + j] = scale * (s * du + c * dv) + py;
    }
    let rot = Rotation3::from_axis_angle([0.0, 0.0, 1.0], angle_rad);
    let new_label = label.rotated(&rot).scaled(scale);
    (out, new_label)
}

/// Random augmentation draw: rotation uniform in +-20 degrees, scale
/// uniform in [0.85, 1.15].
pub fn augment<R: Rng + ?Sized>(
    features: &[f64],
    label: &Pose,
    intrinsics: &CameraIntrinsics,
    rng: &mut R,
) -> (Vec<f64>, Pose) {
    let angle = rng.gen_range(-20.0f64..20.0).to_radians();
    let scale = rng.gen_range(0.85f64..1.15);
    augment_with(features, label, intrinsics, angle, scale)
}

/// Absolute orientation of camera `c` in a static ring of `n` cameras.
fn ring_orientation(c: usize, n: usize) -> Rotation3 {
    let yaw = 2.0 * std::f64::consts::PI * c as f64 / n as f64;
    Rotation3::from_axis_angle([0.0, 1.0, 0.0], yaw)
}

/// Generates a full dataset: labeled single-view samples for the listed
/// subjects, synchronized multi-view samples for the rest. Deterministic
/// for a given config.
pub fn generate_dataset(
    config: &CaptureConfig,
    skeleton: &Skeleton,
    labeled_subject_ids: &[usize],
) -> Result<Dataset> {
    config.validate()?;
    skeleton.validate()?;
    for &id in labeled_subject_ids {
        if id >= config.n_subjects {
            return Err(Error::InvalidConfig(format!(
                "labeled subject {id} out of range ({} subjects)",
                config.n_subjects
            )));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.rng_seed);
    let max_angle = config.pose_angle_deg.to_radians();
    let ptz_bound = PTZ_BOUND_DEG.to_radians();

    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();

    for subject in 0..config.n_subjects {
        let is_labeled = labeled_subject_ids.contains(&subject);
        let style = subject_style(skeleton, config.style_angle_deg.to_radians(), &mut rng);
        for frame in 0..config.frames_per_subject {
            let world = sample_pose_styled(skeleton, &style, max_angle, &mut rng)?;

            // Absolute camera orientations for this frame.
            let orientations: Vec<Rotation3> = (0..config.n_cameras)
                .map(|c| {
                    let base = ring_orientation(c, config.n_cameras);
                    match config.rotation_model {
                        RotationModel::Static => base,
                        RotationModel::PerFrame => {
                            let pan = rng.gen_range(-ptz_bound..ptz_bound);
                            let tilt = rng.gen_range(-ptz_bound..ptz_bound);
                            base.compose(&Rotation3::from_axis_angle([0.0, 1.0, 0.0], pan))
                                .compose(&Rotation3::from_axis_angle([1.0, 0.0, 0.0], tilt))
                        }
                    }
                })
                .collect();

            // Rotation taking view c to view 0: R_c = A_0^T A_c.
            let to_view0: Vec<Rotation3> = orientations
                .iter()
                .enumerate()
                .map(|(c, a)| {
                    if c == 0 {
                        Rotation3::identity()
                    } else {
                        orientations[0].inverse().compose(a)
                    }
                })
                .collect();

            let mut views = Vec::with_capacity(config.n_cameras);
            for (c, a) in orientations.iter().enumerate() {
                let clean = world.rotated(&a.inverse());
                let noisy = perturb_joints(&clean, config.noise_sigma_mm, &mut rng);
                let features = project(&noisy, &config.intrinsics)?;
                let centered = center_at_pelvis(&noisy, skeleton)?;
                let annotated = normalize_bone_lengths(&centered, skeleton)?;
                views.push(View {
                    camera: c,
                    features,
                    pose_mm: annotated,
                    rotation: Some(to_view0[c]),
                });
            }

            if is_labeled {
                let pick = frame % config.n_cameras;
                let v = views.swap_remove(pick);
                labeled.push(LabeledSample {
                    subject,
                    frame,
                    camera: v.camera,
                    features: v.features,
                    pose_mm: v.pose_mm,
                });
            } else {
                unlabeled.push(MultiViewSample {
                    subject,
                    frame,
                    views,
                });
            }
        }
    }

    Ok(Dataset {
        format_version: DATASET_FORMAT_VERSION,
        skeleton: skeleton.clone(),
        meta: DatasetMeta {
            capture: config.clone(),
            labeled_subject_ids: labeled_subject_ids.to_vec(),
        },
        labeled,
        unlabeled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::PoseDistance;
    use crate::losses::multiview_loss;

    fn small_config(noise: f64) -> CaptureConfig {
        CaptureConfig {
            n_subjects: 3,
            frames_per_subject: 6,
            noise_sigma_mm: noise,
            rng_seed: 42,
            ..CaptureConfig::default()
        }
    }

    #[test]
    fn rest_pose_has_exact_bone_lengths() {
        let sk = Skeleton::default_human();
        let rest = rest_pose(&sk).unwrap();
        for j in 0..sk.n_joints() {
            if j == sk.root() {
                continue;
            }
            let len = linalg::norm(linalg::sub(rest.joint(j), rest.joint(sk.parent[j])));
            assert!((len - sk.bone_lengths_mm[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_bound_sampling_gives_rest_pose() {
        let sk = Skeleton::default_human();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let p = sample_pose(&sk, 0.0, &mut rng).unwrap();
        assert_eq!(p, rest_pose(&sk).unwrap());
    }

    #[test]
    fn sampled_poses_preserve_bone_lengths_and_differ_by_seed() {
        let sk = Skeleton::default_human();
        let mut rng_a = ChaCha12Rng::seed_from_u64(2);
        let mut rng_b = ChaCha12Rng::seed_from_u64(3);
        let a = sample_pose(&sk, 0.5, &mut rng_a).unwrap();
        let b = sample_pose(&sk, 0.5, &mut rng_b).unwrap();
        for j in 0..sk.n_joints() {
            if j == sk.root() {
                continue;
            }
            let len = linalg::norm(linalg::sub(a.joint(j), a.joint(sk.parent[j])));
            assert!((len - sk.bone_lengths_mm[j]).abs() < 1e-9);
        }
        assert_eq!(a.joint(sk.root()), [0.0; 3]);
        assert!(crate::alignment::nse_distance(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn make_views_roundtrip() {
        let sk = Skeleton::default_human();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let world = sample_pose(&sk, 0.5, &mut rng).unwrap();
        let rots: Vec<Rotation3> = std::iter::once(Rotation3::identity())
            .chain((1..4).map(|_| Rotation3::random(&mut rng)))
            .collect();
        let views = make_views(&world, &rots).unwrap();
        assert_eq!(views[0], world);
        for (v, r) in views.iter().zip(&rots) {
            let back = v.rotated(r);
            for j in 0..sk.n_joints() {
                let d = linalg::norm(linalg::sub(back.joint(j), world.joint(j)));
                assert!(d < 1e-12, "roundtrip error {d}");
            }
        }
        // Non-identity first rotation is rejected.
        let bad: Vec<Rotation3> = (0..2).map(|_| Rotation3::random(&mut rng)).collect();
        assert!(make_views(&world, &bad).is_err());
    }

    #[test]
    fn projection_sigma_zero_is_deterministic_and_linear_in_focal() {
        let sk = Skeleton::default_human();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let pose = sample_pose(&sk, 0.5, &mut rng).unwrap();
        let intr = CameraIntrinsics::default();
        let mut rng_a = ChaCha12Rng::seed_from_u64(9);
        let mut rng_b = ChaCha12Rng::seed_from_u64(10);
        let a = observe(&pose, &intr, 0.0, &mut rng_a).unwrap();
        let b = observe(&pose, &intr, 0.0, &mut rng_b).unwrap();
        assert_eq!(a, b);
        let doubled = CameraIntrinsics {
            focal_px: 2.0 * intr.focal_px,
            principal_px: [0.0, 0.0],
        };
        let d = project(pose.joints(), &doubled).unwrap();
        let base = project(pose.joints(), &intr).unwrap();
        for (x2, x1) in d.iter().zip(&base) {
            assert!((x2 - 2.0 * x1).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbation_std_matches_sigma() {
        let pose = Pose::zeros(5);
        let sigma = 23.0;
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut values = Vec::new();
        for _ in 0..10_000 {
            for c in perturb_joints(&pose, sigma, &mut rng) {
                values.extend_from_slice(&c);
            }
        }
        let n = values.len() as f64;
        let mean: f64 = values.iter().sum::<f64>() / n;
        let var: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!(
            (std - sigma).abs() / sigma < 0.05,
            "empirical std {std} vs sigma {sigma}"
        );
    }

    #[test]
    fn augmentation_identity_and_scaling() {
        let sk = Skeleton::default_human();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let pose = sample_pose(&sk, 0.5, &mut rng).unwrap();
        let intr = CameraIntrinsics::default();
        let features = project(pose.joints(), &intr).unwrap();

        let (f2, p2) = augment_with(&features, &pose, &intr, 0.0, 1.0);
        assert_eq!(f2, features);
        assert_eq!(p2, pose);

        // Pure scaling: label NSE unchanged, feature norm scales.
        let (f3, p3) = augment_with(&features, &pose, &intr, 0.0, 1.1);
        assert!(crate::alignment::nse_distance(&p3, &pose).unwrap() < 1e-18);
        let norm = |f: &[f64]| f.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm(&f3) - 1.1 * norm(&features)).abs() < 1e-9 * norm(&features));

        // Rotation is an isometry on centered features.
        let (f4, _) = augment_with(&features, &pose, &intr, 0.3, 1.0);
        assert!((norm(&f4) - norm(&features)).abs() < 1e-9 * norm(&features));
    }

    #[test]
    fn dataset_counts_and_split() {
        let sk = Skeleton::default_human();
        let cfg = CaptureConfig {
            n_subjects: 5,
            frames_per_subject: 8,
            ..small_config(23.0)
        };
        let ds = generate_dataset(&cfg, &sk, &[0]).unwrap();
        assert_eq!(ds.labeled.len(), 8);
        assert_eq!(ds.unlabeled.len(), 4 * 8);
        assert!(ds.labeled.iter().all(|s| s.subject == 0));
        assert!(ds.unlabeled.iter().all(|s| s.subject != 0));
        for s in &ds.unlabeled {
            assert_eq!(s.views.len(), cfg.n_cameras);
            assert!(s.views[0].rotation.unwrap().deviation_from_identity() == 0.0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let sk = Skeleton::default_human();
        let cfg = small_config(23.0);
        let a = generate_dataset(&cfg, &sk, &[0]).unwrap();
        let b = generate_dataset(&cfg, &sk, &[0]).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let cfg2 = CaptureConfig {
            rng_seed: 43,
            ..small_config(23.0)
        };
        let c = generate_dataset(&cfg2, &sk, &[0]).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn noiseless_views_are_exactly_consistent() {
        let sk = Skeleton::default_human();
        for model in [RotationModel::Static, RotationModel::PerFrame] {
            let cfg = CaptureConfig {
                rotation_model: model,
                ..small_config(0.0)
            };
            let ds = generate_dataset(&cfg, &sk, &[0]).unwrap();
            for s in &ds.unlabeled {
                let reference = &s.views[0].pose_mm;
                for v in &s.views {
                    let back = v.pose_mm.rotated(&v.rotation.unwrap());
                    for j in 0..sk.n_joints() {
                        let d = linalg::norm(linalg::sub(back.joint(j), reference.joint(j)));
                        assert!(d < 1e-12, "consistency error {d} ({model:?})");
                    }
                }
                // Cross-module check: the consistency loss vanishes.
                let poses: Vec<Pose> = s.views.iter().map(|v| v.pose_mm.clone()).collect();
                let rots: Vec<Rotation3> = s.views.iter().map(|v| v.rotation.unwrap()).collect();
                let out = multiview_loss(&poses, &rots, 2, PoseDistance::Nse, sk.root()).unwrap();
                assert!(out.value < 1e-20);
            }
        }
    }

    #[test]
    fn generated_poses_hit_bone_lengths() {
        let sk = Skeleton::default_human();
        let ds = generate_dataset(&small_config(23.0), &sk, &[0]).unwrap();
        let check = |p: &Pose| {
            for j in 0..sk.n_joints() {
                if j == sk.root() {
                    continue;
                }
                let len = linalg::norm(linalg::sub(p.joint(j), p.joint(sk.parent[j])));
                assert!((len - sk.bone_lengths_mm[j]).abs() < 1e-9);
            }
        };
        ds.labeled.iter().for_each(|s| check(&s.pose_mm));
        ds.unlabeled
            .iter()
            .flat_map(|s| s.views.iter())
            .for_each(|v| check(&v.pose_mm));
    }

    #[test]
    fn dataset_roundtrip() {
        let sk = Skeleton::default_human();
        let ds = generate_dataset(&small_config(5.0), &sk, &[0, 1]).unwrap();
        let dir = std::env::temp_dir().join("mvpose_synth_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.json");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(ds, back);
    }
}
