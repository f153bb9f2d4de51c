use nalgebra::{Point3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rio::datasynth::{generate_corpus, CorpusConfig, RotationAxis};
use rio::descriptor::Descriptor;
use rio::evaluation::{judge_instance, Prediction, PredictionStatus, DEFAULT_THRESHOLDS};
use rio::keypoints::Keypoint;
use rio::registration::*;
use rio::volume::TsdfVolume;
use rio::{RigidPose, RioError};

fn pose_from(axis: [f64; 3], angle: f64, t: [f64; 3]) -> RigidPose {
    let axis = Vector3::from(axis);
    let r = if axis.norm() < 1e-6 {
        nalgebra::Matrix3::identity()
    } else {
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).to_rotation_matrix().into_inner()
    };
    RigidPose::new(r, Vector3::from(t))
}

#[test]
fn ransac_recovers_the_pose_despite_30_percent_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = pose_from([0.3, -1.0, 0.5], 2.1, [0.4, 1.5, -0.7]);
    let mut corrs = Vec::new();
    for _ in 0..70 {
        let p = Point3::from(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
        corrs.push(Correspondence::new(p, truth.transform_point(&p)));
    }
    for _ in 0..30 {
        let p = Point3::from(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
        let q = Point3::from(Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)));
        corrs.push(Correspondence::new(p, q));
    }
    let res = ransac_align(&corrs, &RansacConfig::default()).unwrap();
    assert!((res.pose.rotation - truth.rotation).norm() < 1e-6);
    assert!((res.pose.translation - truth.translation).norm() < 1e-6);
    assert!((0..70).all(|i| res.inliers.contains(&i)));
}

#[test]
fn ransac_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth = pose_from([0.0, 0.0, 1.0], 0.4, [1.0, 0.0, 0.0]);
    let corrs: Vec<_> = (0..60)
        .map(|i| {
            let p = Point3::from(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let q = if i % 3 == 0 { Point3::from(Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0))) } else { truth.transform_point(&p) };
            Correspondence::new(p, q)
        })
        .collect();
    let cfg = RansacConfig { seed: 17, max_iterations: 50, ..Default::default() };
    assert_eq!(ransac_align(&corrs, &cfg).unwrap(), ransac_align(&corrs, &cfg).unwrap());
}

#[test]
fn no_consensus_is_an_alignment_failure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let corrs: Vec<_> = (0..20)
        .map(|_| {
            Correspondence::new(
                Point3::from(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0))),
                Point3::from(Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0))),
            )
        })
        .collect();
    let cfg = RansacConfig { min_inliers: 15, ..Default::default() };
    assert!(matches!(ransac_align(&corrs, &cfg), Err(RioError::AlignmentFailure(_))));
}

proptest! {
    #[test]
    fn kabsch_recovers_exact_poses(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in -3.1f64..3.1,
        t in prop::array::uniform3(-10.0f64..10.0),
        pts in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 4..40),
    ) {
        let truth = pose_from(axis, angle, t);
        let corrs: Vec<_> = pts.iter().map(|p| {
            let p = Point3::from(*p);
            Correspondence::new(p, truth.transform_point(&p))
        }).collect();
        // random points can be nearly collinear; those are rejected, not mis-solved
        match kabsch(&corrs) {
            Ok(est) => {
                prop_assert!(sum_squared_residuals(&est, &corrs) < 1e-12);
                prop_assert!((est.rotation.determinant() - 1.0).abs() < 1e-9);
            }
            Err(e) => prop_assert!(matches!(e, RioError::DegenerateInput(_))),
        }
    }

    #[test]
    fn knn_returns_sorted_distances(
        src in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 3), 1..10),
        tgt in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 3), 1..20),
        k in 1usize..25,
    ) {
        let s = FeatureMatrix::from_rows(3, &src).unwrap();
        let t = FeatureMatrix::from_rows(3, &tgt).unwrap();
        let matches = match_knn(&s, &t, k).unwrap();
        prop_assert_eq!(matches.len(), src.len() * k.min(tgt.len()));
        for w in matches.windows(2) {
            if w[0].source == w[1].source {
                prop_assert!(w[0].distance <= w[1].distance);
            }
        }
    }
}

/// Features that are the keypoint position mapped back into the reference
/// frame: a perfect descriptor for one known motion.
struct Oracle<'a> {
    source: &'a TsdfVolume,
    motion: RigidPose,
}

impl Descriptor for Oracle<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn describe(&self, volume: &TsdfVolume, keypoints: &[Keypoint]) -> rio::Result<FeatureMatrix> {
        let back = self.motion.inverse();
        let rows: Vec<Vec<f32>> = keypoints
            .iter()
            .map(|k| {
                let p = if std::ptr::eq(volume, self.source) { k.position } else { back.transform_point(&k.position) };
                vec![p.x as f32, p.y as f32, p.z as f32]
            })
            .collect();
        FeatureMatrix::from_rows(3, &rows)
    }
}

#[test]
fn pipeline_with_a_perfect_descriptor_relocalizes_moved_objects() {
    let mut cfg = CorpusConfig { scenes: 1, seed: 12, ..Default::default() };
    cfg.changes.move_fraction = 1.0;
    cfg.changes.remove_fraction = 0.0;
    cfg.changes.add_fraction = 0.0;
    cfg.changes.rotation_axis = RotationAxis::Vertical;
    cfg.scene.objects = 3;
    let pair = &generate_corpus(&cfg).unwrap()[0];
    let (source, target) = (pair.reference_volume().unwrap(), pair.rescan_volume().unwrap());
    let gt = pair.ground_truth();
    let rc = RelocalizeConfig::default();
    let mut hits = 0;
    for q in pair.queries() {
        let record = gt.instances.iter().find(|r| r.instance_id == q.instance_id).unwrap();
        let oracle = Oracle { source: &source, motion: record.gt_pose };
        let (pose, diag) = relocalize_instance(&oracle, &source, &q.segment, &target, &rc).unwrap();
        assert!(diag.inliers >= rc.ransac.min_inliers);
        let pred = Prediction { scan_pair_id: gt.scan_pair_id.clone(), instance_id: q.instance_id, pose, status: PredictionStatus::Ok };
        hits += judge_instance(&pred, record, &DEFAULT_THRESHOLDS).unwrap().hits[0] as usize;
    }
    assert!(!pair.queries().is_empty());
    assert_eq!(hits, pair.queries().len());
}
