//! Overlap measurement, descriptor matching, and registration-recall
//! scoring.

use super::{BenchError, EvalConfig};
use crate::geom::{PointCloud, RigidTransform};
use crate::network::Descriptor;
use crate::orient::descriptor_distance;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Smallest inlier-fraction threshold on the sweep grid.
pub const TAU2_SWEEP_MIN: f64 = 0.01;
/// Largest inlier-fraction threshold on the sweep grid.
pub const TAU2_SWEEP_MAX: f64 = 0.20;
/// Spacing of the sweep grid.
pub const TAU2_SWEEP_STEP: f64 = 0.01;

fn nearest_distance(query: &Vector3<f64>, cloud: &[Vector3<f64>]) -> f64 {
    cloud
        .iter()
        .map(|p| (p - query).norm_squared())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Fraction of points with a cross-cloud neighbor within `inlier_dist` once
/// the target is mapped into the source frame, averaged over both
/// directions. The neighbor test is inclusive (`distance <= inlier_dist`).
pub fn compute_overlap(
    source: &PointCloud,
    target: &PointCloud,
    gt_pose: &RigidTransform,
    inlier_dist: f64,
) -> Result<f64, BenchError> {
    if source.is_empty() {
        return Err(BenchError::EmptyCloud("overlap source"));
    }
    if target.is_empty() {
        return Err(BenchError::EmptyCloud("overlap target"));
    }
    if !(inlier_dist > 0.0) {
        return Err(BenchError::InvalidConfig(format!(
            "inlier distance must be positive, got {inlier_dist}"
        )));
    }
    let mapped_target: Vec<Vector3<f64>> =
        target.points.iter().map(|p| gt_pose.apply(p)).collect();
    let forward = source
        .points
        .iter()
        .filter(|p| nearest_distance(p, &mapped_target) <= inlier_dist)
        .count() as f64
        / source.points.len() as f64;
    let backward = mapped_target
        .iter()
        .filter(|p| nearest_distance(p, &source.points) <= inlier_dist)
        .count() as f64
        / mapped_target.len() as f64;
    Ok(0.5 * (forward + backward))
}

/// Nearest-neighbor correspondences from source descriptors to target
/// descriptors under the L2 descriptor distance. Ties resolve to the lowest
/// target index. With `mutual` set, a pair survives only when the source
/// descriptor is in turn the nearest neighbor of its matched target.
pub fn match_keypoints(
    source: &[Descriptor],
    target: &[Descriptor],
    mutual: bool,
) -> Result<Vec<(usize, usize)>, BenchError> {
    if source.is_empty() {
        return Err(BenchError::EmptyCloud("source descriptors"));
    }
    if target.is_empty() {
        return Err(BenchError::EmptyCloud("target descriptors"));
    }
    let nearest = |query: &Descriptor, pool: &[Descriptor]| -> Result<usize, BenchError> {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (j, candidate) in pool.iter().enumerate() {
            let d = descriptor_distance(query, candidate)?;
            if d < best_dist {
                best = j;
                best_dist = d;
            }
        }
        Ok(best)
    };
    let mut pairs = Vec::with_capacity(source.len());
    for (i, desc) in source.iter().enumerate() {
        let j = nearest(desc, target)?;
        if mutual && nearest(&target[j], source)? != i {
            continue;
        }
        pairs.push((i, j));
    }
    Ok(pairs)
}

/// One fragment pair reduced to its keypoints and their descriptors, ready
/// for matching. `gt_pose` maps target-frame coordinates into the source
/// frame; `overlap` is the pair's ground-truth overlap fraction.
#[derive(Debug, Clone)]
pub struct DescribedPair {
    pub keypoints_source: Vec<Vector3<f64>>,
    pub keypoints_target: Vec<Vector3<f64>>,
    pub desc_source: Vec<Descriptor>,
    pub desc_target: Vec<Descriptor>,
    pub gt_pose: RigidTransform,
    pub overlap: f64,
}

/// Outcome of one fragment pair inside a recall run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairOutcome {
    /// Whether the pair cleared the minimum-overlap gate.
    pub evaluated: bool,
    /// Fraction of correspondences within `tau1` of their ground-truth
    /// location (zero for unevaluated pairs).
    pub inlier_ratio: f64,
    /// Whether the inlier ratio strictly exceeds `tau2`.
    pub registered: bool,
    /// Number of descriptor correspondences considered.
    pub correspondences: usize,
}

/// Dataset-level registration recall with the per-pair breakdown and the
/// recall curve over the inlier-fraction sweep grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecallReport {
    pub recall: f64,
    pub evaluated_pairs: usize,
    pub per_pair: Vec<PairOutcome>,
    /// `(tau2, recall)` samples on the sweep grid.
    pub curve: Vec<(f64, f64)>,
}

/// Recall as a function of the inlier-fraction threshold, sampled on the
/// sweep grid, from the inlier ratios of the evaluated pairs.
pub fn recall_curve(inlier_ratios: &[f64]) -> Vec<(f64, f64)> {
    let steps = ((TAU2_SWEEP_MAX - TAU2_SWEEP_MIN) / TAU2_SWEEP_STEP).round() as usize + 1;
    (0..steps)
        .map(|step| {
            // Divide integers so thresholds land on the exact representable
            // values 0.01, 0.02, ... rather than accumulating drift.
            let tau2 = (step + 1) as f64 / 100.0;
            let recall = if inlier_ratios.is_empty() {
                0.0
            } else {
                inlier_ratios.iter().filter(|&&r| r > tau2).count() as f64
                    / inlier_ratios.len() as f64
            };
            (tau2, recall)
        })
        .collect()
}

/// Scores descriptor quality over a set of fragment pairs: pairs at or above
/// the overlap gate are matched by nearest descriptor, a correspondence is
/// correct when the ground-truth-mapped target keypoint lies strictly within
/// `tau1` of its source keypoint, and a pair registers when its correct
/// fraction strictly exceeds `tau2`. Recall is the registered fraction of
/// evaluated pairs.
pub fn registration_recall(
    pairs: &[DescribedPair],
    cfg: &EvalConfig,
) -> Result<RecallReport, BenchError> {
    cfg.validate()?;
    let mut per_pair = Vec::with_capacity(pairs.len());
    let mut evaluated_ratios = Vec::new();
    for pair in pairs {
        if pair.keypoints_source.len() != pair.desc_source.len() {
            return Err(BenchError::CountMismatch {
                what: "source keypoint/descriptor",
                a: pair.keypoints_source.len(),
                b: pair.desc_source.len(),
            });
        }
        if pair.keypoints_target.len() != pair.desc_target.len() {
            return Err(BenchError::CountMismatch {
                what: "target keypoint/descriptor",
                a: pair.keypoints_target.len(),
                b: pair.desc_target.len(),
            });
        }
        if pair.overlap < cfg.min_overlap {
            per_pair.push(PairOutcome {
                evaluated: false,
                inlier_ratio: 0.0,
                registered: false,
                correspondences: 0,
            });
            continue;
        }
        // A fragment can lose all its keypoints to support filtering; score
        // it as an evaluated failure rather than refusing the whole run.
        let matches = if pair.desc_source.is_empty() || pair.desc_target.is_empty() {
            Vec::new()
        } else {
            match_keypoints(&pair.desc_source, &pair.desc_target, false)?
        };
        let correct = matches
            .iter()
            .filter(|&&(i, j)| {
                let mapped = pair.gt_pose.apply(&pair.keypoints_target[j]);
                (mapped - pair.keypoints_source[i]).norm() < cfg.tau1
            })
            .count();
        let inlier_ratio = if matches.is_empty() {
            0.0
        } else {
            correct as f64 / matches.len() as f64
        };
        evaluated_ratios.push(inlier_ratio);
        per_pair.push(PairOutcome {
            evaluated: true,
            inlier_ratio,
            registered: inlier_ratio > cfg.tau2,
            correspondences: matches.len(),
        });
    }
    if evaluated_ratios.is_empty() {
        return Err(BenchError::NoQualifyingPairs);
    }
    let registered = per_pair.iter().filter(|o| o.registered).count();
    Ok(RecallReport {
        recall: registered as f64 / evaluated_ratios.len() as f64,
        evaluated_pairs: evaluated_ratios.len(),
        per_pair,
        curve: recall_curve(&evaluated_ratios),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RotationZYZ;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desc(values: Vec<f64>) -> Descriptor {
        Descriptor {
            bandwidth: 1,
            values,
        }
    }

    fn random_desc(rng: &mut impl Rng, dim: usize) -> Descriptor {
        desc((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identical_clouds_overlap_fully() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Vector3<f64>> = (0..200)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let cloud = PointCloud::new(points.clone());
        let overlap =
            compute_overlap(&cloud, &cloud, &RigidTransform::IDENTITY, 0.05).unwrap();
        assert_eq!(overlap, 1.0);

        let rot = RotationZYZ::new(0.4, 0.9, -1.3);
        let pose = RigidTransform::new(rot.to_matrix(), Vector3::new(0.3, -0.2, 0.7));
        let inv = pose.inverse();
        let target = PointCloud::new(points.iter().map(|p| inv.apply(p)).collect());
        let overlap = compute_overlap(&cloud, &target, &pose, 0.05).unwrap();
        assert_eq!(overlap, 1.0);
    }

    #[test]
    fn half_shifted_grids_overlap_by_half() {
        let mut source = Vec::new();
        let mut target = Vec::new();
        for row in 0..11 {
            let y = row as f64 / 100.0;
            for col in 0..=100 {
                source.push(Vector3::new(col as f64 / 100.0, y, 0.0));
                target.push(Vector3::new((col + 50) as f64 / 100.0, y, 0.0));
            }
        }
        let overlap = compute_overlap(
            &PointCloud::new(source),
            &PointCloud::new(target),
            &RigidTransform::IDENTITY,
            0.01,
        )
        .unwrap();
        assert!(
            (overlap - 0.5).abs() <= 0.02,
            "half-shifted grids measured {overlap}"
        );
    }

    #[test]
    fn overlap_rejects_empty_clouds_and_bad_radius() {
        let cloud = PointCloud::new(vec![Vector3::zeros()]);
        let empty = PointCloud::new(vec![]);
        assert!(matches!(
            compute_overlap(&empty, &cloud, &RigidTransform::IDENTITY, 0.05),
            Err(BenchError::EmptyCloud(_))
        ));
        assert!(matches!(
            compute_overlap(&cloud, &empty, &RigidTransform::IDENTITY, 0.05),
            Err(BenchError::EmptyCloud(_))
        ));
        assert!(matches!(
            compute_overlap(&cloud, &cloud, &RigidTransform::IDENTITY, 0.0),
            Err(BenchError::InvalidConfig(_))
        ));
    }

    #[test]
    fn matching_agrees_with_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let source: Vec<Descriptor> = (0..30).map(|_| random_desc(&mut rng, 8)).collect();
        let target: Vec<Descriptor> = (0..40).map(|_| random_desc(&mut rng, 8)).collect();
        let pairs = match_keypoints(&source, &target, false).unwrap();
        assert_eq!(pairs.len(), source.len());
        for (i, (src_idx, tgt_idx)) in pairs.iter().enumerate() {
            assert_eq!(*src_idx, i);
            let mut best = (f64::INFINITY, usize::MAX);
            for (j, cand) in target.iter().enumerate() {
                let d = descriptor_distance(&source[i], cand).unwrap();
                if d < best.0 {
                    best = (d, j);
                }
            }
            assert_eq!(*tgt_idx, best.1);
        }
    }

    #[test]
    fn matching_breaks_ties_toward_the_lowest_index() {
        let source = vec![desc(vec![1.0, 0.0])];
        let target = vec![
            desc(vec![5.0, 5.0]),
            desc(vec![1.0, 0.25]),
            desc(vec![1.0, 0.25]),
            desc(vec![1.0, -0.25]),
        ];
        // Indices 1, 2, and 3 are all at distance 0.25; index 1 must win.
        let pairs = match_keypoints(&source, &target, false).unwrap();
        assert_eq!(pairs, vec![(0, 1)]);
    }

    #[test]
    fn mutual_filter_keeps_only_reciprocal_pairs() {
        // Source 0 and 1 both map to target 0; target 0 maps back to
        // source 0, so only (0, 0) survives the mutual filter.
        let source = vec![desc(vec![0.0]), desc(vec![0.4])];
        let target = vec![desc(vec![0.1]), desc(vec![9.0])];
        let all = match_keypoints(&source, &target, false).unwrap();
        assert_eq!(all, vec![(0, 0), (1, 0)]);
        let mutual = match_keypoints(&source, &target, true).unwrap();
        assert_eq!(mutual, vec![(0, 0)]);
        assert!(mutual.iter().all(|p| all.contains(p)));
    }

    #[test]
    fn matching_rejects_empty_and_mismatched_inputs() {
        let source = vec![desc(vec![0.0])];
        assert!(matches!(
            match_keypoints(&source, &[], false),
            Err(BenchError::EmptyCloud(_))
        ));
        assert!(matches!(
            match_keypoints(&[], &source, false),
            Err(BenchError::EmptyCloud(_))
        ));
        let wide = vec![desc(vec![0.0, 1.0])];
        assert!(match_keypoints(&source, &wide, false).is_err());
    }

    fn perfect_pair(rng: &mut impl Rng, n: usize, overlap: f64) -> DescribedPair {
        let rot = RotationZYZ::new(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        );
        let gt = RigidTransform::new(
            rot.to_matrix(),
            Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ),
        );
        let inv = gt.inverse();
        let keypoints_source: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let keypoints_target: Vec<Vector3<f64>> =
            keypoints_source.iter().map(|p| inv.apply(p)).collect();
        let desc_source: Vec<Descriptor> = (0..n).map(|_| random_desc(rng, 6)).collect();
        DescribedPair {
            keypoints_source,
            keypoints_target,
            desc_target: desc_source.clone(),
            desc_source,
            gt_pose: gt,
            overlap,
        }
    }

    #[test]
    fn perfect_descriptors_reach_full_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let pairs: Vec<DescribedPair> =
            (0..5).map(|_| perfect_pair(&mut rng, 40, 0.8)).collect();
        let report = registration_recall(&pairs, &EvalConfig::default()).unwrap();
        assert_eq!(report.recall, 1.0);
        assert_eq!(report.evaluated_pairs, 5);
        for outcome in &report.per_pair {
            assert!(outcome.evaluated);
            assert!(outcome.registered);
            assert_eq!(outcome.inlier_ratio, 1.0);
            assert_eq!(outcome.correspondences, 40);
        }
        for (_, r) in &report.curve {
            assert_eq!(*r, 1.0);
        }
    }

    #[test]
    fn uninformative_descriptors_score_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pairs: Vec<DescribedPair> = (0..5)
            .map(|_| {
                let mut pair = perfect_pair(&mut rng, 40, 0.8);
                // Break the correspondence: fresh random target descriptors
                // and far-away target keypoints.
                pair.desc_target = (0..40).map(|_| random_desc(&mut rng, 6)).collect();
                for p in &mut pair.keypoints_target {
                    *p += Vector3::new(100.0, 0.0, 0.0);
                }
                pair
            })
            .collect();
        let cfg = EvalConfig {
            tau1: 0.01,
            ..EvalConfig::default()
        };
        let report = registration_recall(&pairs, &cfg).unwrap();
        assert_eq!(report.recall, 0.0);
        for outcome in &report.per_pair {
            assert_eq!(outcome.inlier_ratio, 0.0);
        }
    }

    #[test]
    fn overlap_gate_and_empty_sets_are_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let good = perfect_pair(&mut rng, 10, 0.9);
        let low = perfect_pair(&mut rng, 10, 0.1);
        let report =
            registration_recall(&[good.clone(), low.clone()], &EvalConfig::default()).unwrap();
        assert_eq!(report.evaluated_pairs, 1);
        assert!(report.per_pair[0].evaluated);
        assert!(!report.per_pair[1].evaluated);
        assert_eq!(report.recall, 1.0);

        match registration_recall(&[low], &EvalConfig::default()) {
            Err(BenchError::NoQualifyingPairs) => {}
            other => panic!("expected NoQualifyingPairs, got {other:?}"),
        }

        let mut empty = good;
        empty.keypoints_source.clear();
        empty.desc_source.clear();
        let report = registration_recall(&[empty], &EvalConfig::default()).unwrap();
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.per_pair[0].correspondences, 0);
    }

    #[test]
    fn registration_threshold_is_strict() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        // 20 correspondences, exactly 1 correct: inlier ratio 1/20 = tau2.
        let mut pair = perfect_pair(&mut rng, 20, 0.9);
        for p in pair.keypoints_target.iter_mut().skip(1) {
            *p += Vector3::new(100.0, 0.0, 0.0);
        }
        let cfg = EvalConfig {
            tau2: 0.05,
            ..EvalConfig::default()
        };
        let report = registration_recall(&[pair.clone()], &cfg).unwrap();
        assert_eq!(report.per_pair[0].inlier_ratio, 0.05);
        assert!(!report.per_pair[0].registered, "ratio equal to tau2 must not register");
        let looser = EvalConfig {
            tau2: 0.04,
            ..EvalConfig::default()
        };
        let report = registration_recall(&[pair], &looser).unwrap();
        assert!(report.per_pair[0].registered);
    }

    #[test]
    fn curve_is_monotone_and_consistent_with_the_scalar_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pairs: Vec<DescribedPair> = (0..8)
            .map(|i| {
                let mut pair = perfect_pair(&mut rng, 20, 0.9);
                // Corrupt a varying share of target keypoints so inlier
                // ratios spread over the sweep range.
                for p in pair.keypoints_target.iter_mut().skip(2 * i) {
                    *p += Vector3::new(50.0, 0.0, 0.0);
                }
                pair
            })
            .collect();
        let cfg = EvalConfig::default();
        let report = registration_recall(&pairs, &cfg).unwrap();
        assert_eq!(report.curve.len(), 20);
        assert_eq!(report.curve[0].0, 0.01);
        assert_eq!(report.curve[19].0, 0.20);
        for window in report.curve.windows(2) {
            assert!(window[1].1 <= window[0].1, "recall must not rise with tau2");
        }
        let at_default = report
            .curve
            .iter()
            .find(|(t, _)| *t == cfg.tau2)
            .expect("default tau2 lies on the sweep grid");
        assert_eq!(at_default.1, report.recall);
    }

    #[test]
    fn keypoint_descriptor_count_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut pair = perfect_pair(&mut rng, 10, 0.9);
        pair.desc_source.pop();
        assert!(matches!(
            registration_recall(&[pair], &EvalConfig::default()),
            Err(BenchError::CountMismatch { .. })
        ));
    }
}
