//! Deterministic consensus-set selection over per-view poses.
//!
//! Instead of randomized sampling, every size-k subset of the views is
//! scored and the subset whose members agree best with their own mean is
//! kept. With at most a handful of synchronized views the enumeration is
//! exact and cheap (C(4,2) = 6 subsets for the default setup).

use crate::alignment::PoseDistance;
use crate::error::{Error, Result};
use crate::pose::Pose;

#[derive(Debug, Clone)]
pub struct ConsensusResult {
    /// Selected view indices, sorted ascending.
    pub member_indices: Vec<usize>,
    /// Mean of the member poses, re-centered at the root joint.
    pub reference: Pose,
    /// Sum over members of the distance to the reference (the minimized
    /// disagreement score).
    pub agreement: f64,
}

/// Mean of the given poses, re-centered at `root`.
pub fn reference_pose(members: &[&Pose], root: usize) -> Result<Pose> {
    Pose::mean(members, root)
}

/// Picks the size-`k` subset of `rotated_poses` (already expressed in a
/// common frame) with the smallest disagreement, defined as the summed
/// `distance` from each member to the subset mean. Ties break toward the
/// lexicographically smallest index tuple. Subsets whose mean is
/// degenerate under the chosen distance are never selected.
pub fn select_consensus(
    rotated_poses: &[Pose],
    k: usize,
    distance: PoseDistance,
    root: usize,
) -> Result<ConsensusResult> {
    let n = rotated_poses.len();
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "consensus size must be at least 2, got {k}"
        )));
    }
    if n < k {
        return Err(Error::DatasetTooSmall(format!(
            "{n} views available, consensus size {k}"
        )));
    }
    for p in rotated_poses {
        rotated_poses[0].check_shape(p)?;
        if distance == PoseDistance::Nse {
            p.checked_norm("consensus input")?;
        }
    }

    let mut best: Option<(Vec<usize>, Pose, f64)> = None;
    let mut indices: Vec<usize> = (0..k).collect();
    loop {
        let members: Vec<&Pose> = indices.iter().map(|&i| &rotated_poses[i]).collect();
        let mean = reference_pose(&members, root)?;
        let score: Option<f64> = members
            .iter()
            .map(|m| distance.value(m, &mean).ok())
            .sum();
        if let Some(score) = score {
            let better = match &best {
                Some((_, _, s)) => score < *s,
                None => true,
            };
            if better {
                best = Some((indices.clone(), mean, score));
            }
        }

        if !next_combination(&mut indices, n) {
            break;
        }
    }

    let (member_indices, reference, agreement) = best.ok_or(Error::DegeneratePose {
        context: "consensus: every subset mean degenerate",
        norm: 0.0,
        threshold: crate::pose::DEGENERATE_NORM_MM,
    })?;
    Ok(ConsensusResult {
        member_indices,
        reference,
        agreement,
    })
}

/// Advances `indices` to the next k-combination of `0..n` in lexicographic
/// order; returns false after the last one.
fn next_combination(indices: &mut [usize], n: usize) -> bool {
    let k = indices.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if indices[i] != i + n - k {
            indices[i] += 1;
            for j in i + 1..k {
                indices[j] = indices[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_pose(n: usize, rng: &mut ChaCha12Rng) -> Pose {
        Pose::from_columns(
            (0..n)
                .map(|_| {
                    [
                        rng.gen_range(-300.0..300.0),
                        rng.gen_range(-300.0..300.0),
                        rng.gen_range(-300.0..300.0),
                    ]
                })
                .collect(),
        )
        .unwrap()
        .centered(0)
    }

    /// Independent brute-force oracle: enumerate subsets recursively.
    fn brute_force(
        poses: &[Pose],
        k: usize,
        distance: PoseDistance,
        root: usize,
    ) -> (Vec<usize>, f64) {
        fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            if n < k {
                return vec![];
            }
            let mut out = subsets(n - 1, k - 1)
                .into_iter()
                .map(|mut s| {
                    s.push(n - 1);
                    s
                })
                .collect::<Vec<_>>();
            out.extend(subsets(n - 1, k));
            out
        }
        let mut all = subsets(poses.len(), k);
        all.sort();
        let mut best: Option<(Vec<usize>, f64)> = None;
        for s in all {
            let members: Vec<&Pose> = s.iter().map(|&i| &poses[i]).collect();
            let mean = Pose::mean(&members, root).unwrap();
            let mut score = 0.0;
            let mut ok = true;
            for m in &members {
                match distance.value(m, &mean) {
                    Ok(v) => score += v,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            if best.as_ref().map_or(true, |(_, b)| score < *b) {
                best = Some((s, score));
            }
        }
        best.unwrap()
    }

    #[test]
    fn identical_poses_tiebreak_lexicographic() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let p = random_pose(5, &mut rng);
        let poses = vec![p.clone(), p.clone(), p.clone(), p];
        let res = select_consensus(&poses, 2, PoseDistance::Nse, 0).unwrap();
        assert_eq!(res.member_indices, vec![0, 1]);
        assert!(res.agreement < 1e-20);
    }

    #[test]
    fn outlier_is_excluded() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let base = random_pose(6, &mut rng);
        let jitter = |p: &Pose, rng: &mut ChaCha12Rng| {
            Pose::from_columns(
                p.joints()
                    .iter()
                    .map(|c| {
                        [
                            c[0] + rng.gen_range(-1.0..1.0),
                            c[1] + rng.gen_range(-1.0..1.0),
                            c[2] + rng.gen_range(-1.0..1.0),
                        ]
                    })
                    .collect(),
            )
            .unwrap()
        };
        let outlier = random_pose(6, &mut rng);
        let poses = vec![
            jitter(&base, &mut rng),
            jitter(&base, &mut rng),
            jitter(&base, &mut rng),
            outlier,
        ];
        let res = select_consensus(&poses, 2, PoseDistance::Nse, 0).unwrap();
        assert!(!res.member_indices.contains(&3));
        // Every pair containing the outlier scores strictly worse.
        for other in 0..3 {
            let members = vec![&poses[other], &poses[3]];
            let mean = Pose::mean(&members, 0).unwrap();
            let score: f64 = members
                .iter()
                .map(|m| PoseDistance::Nse.value(m, &mean).unwrap())
                .sum();
            assert!(score > res.agreement);
        }
    }

    #[test]
    fn matches_bruteforce_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for n in 2..=6usize {
            for k in 2..=n {
                for _ in 0..20 {
                    let poses: Vec<Pose> = (0..n).map(|_| random_pose(5, &mut rng)).collect();
                    let res = select_consensus(&poses, k, PoseDistance::Nse, 0).unwrap();
                    let (oracle_idx, oracle_score) = brute_force(&poses, k, PoseDistance::Nse, 0);
                    assert_eq!(res.member_indices, oracle_idx);
                    assert_eq!(res.agreement, oracle_score);
                }
            }
        }
    }

    #[test]
    fn full_set_when_k_equals_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let poses: Vec<Pose> = (0..4).map(|_| random_pose(5, &mut rng)).collect();
        let res = select_consensus(&poses, 4, PoseDistance::Nse, 0).unwrap();
        assert_eq!(res.member_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        let poses: Vec<Pose> = (0..5).map(|_| random_pose(5, &mut rng)).collect();
        let res = select_consensus(&poses, 2, PoseDistance::Nse, 0).unwrap();
        let perm = [4usize, 2, 0, 3, 1];
        let permuted: Vec<Pose> = perm.iter().map(|&i| poses[i].clone()).collect();
        let res_p = select_consensus(&permuted, 2, PoseDistance::Nse, 0).unwrap();
        // Map the permuted winner back to original indices.
        let mut back: Vec<usize> = res_p.member_indices.iter().map(|&i| perm[i]).collect();
        back.sort_unstable();
        assert_eq!(back, res.member_indices);
        assert!((res.agreement - res_p.agreement).abs() < 1e-12);
    }

    #[test]
    fn duplicate_member_does_not_change_score() {
        let mut rng = ChaCha12Rng::seed_from_u64(26);
        let mut poses: Vec<Pose> = (0..4).map(|_| random_pose(5, &mut rng)).collect();
        let res = select_consensus(&poses, 2, PoseDistance::Nse, 0).unwrap();
        poses.push(poses[res.member_indices[0]].clone());
        let res2 = select_consensus(&poses, 2, PoseDistance::Nse, 0).unwrap();
        assert!(res2.agreement <= res.agreement + 1e-15);
    }

    #[test]
    fn antipodal_members_mean_is_degenerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(27);
        let p = random_pose(5, &mut rng);
        let members = vec![&p];
        assert_eq!(reference_pose(&members, 0).unwrap(), p);
        let neg = p.scaled(-1.0);
        let mean = reference_pose(&[&p, &neg], 0).unwrap();
        assert!(mean.norm() < 1e-12);
        // NSE against that mean is degenerate, so a 2-view set of
        // antipodal poses has no valid consensus.
        assert!(matches!(
            select_consensus(&[p, neg], 2, PoseDistance::Nse, 0),
            Err(Error::DegeneratePose { .. })
        ));
    }

    #[test]
    fn reference_pose_matches_elementwise_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(28);
        let poses: Vec<Pose> = (0..3).map(|_| random_pose(4, &mut rng)).collect();
        let refs: Vec<&Pose> = poses.iter().collect();
        let mean = reference_pose(&refs, 0).unwrap();
        for j in 0..4 {
            for c in 0..3 {
                let expect = (poses[0].joint(j)[c] + poses[1].joint(j)[c] + poses[2].joint(j)[c]) / 3.0
                    - (poses[0].joint(0)[c] + poses[1].joint(0)[c] + poses[2].joint(0)[c]) / 3.0;
                assert!((mean.joint(j)[c] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn errors_on_too_few_views() {
        let p = random_pose(4, &mut ChaCha12Rng::seed_from_u64(29));
        assert!(matches!(
            select_consensus(&[p], 2, PoseDistance::Nse, 0),
            Err(Error::DatasetTooSmall(_))
        ));
    }
}
