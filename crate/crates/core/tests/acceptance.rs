//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line and
//! then asserts, so `cargo test --test acceptance -- --nocapture` shows the
//! whole scorecard. Tolerances are the constants next to each test.

use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rio::datasynth::*;
use rio::descriptor::io::{read_model, write_model};
use rio::descriptor::*;
use rio::evaluation::*;
use rio::keypoints::{Provenance, TrainingTriplet};
use rio::registration::{kabsch, ransac_align, Correspondence, RansacConfig, RelocalizeConfig};
use rio::volume::io::{read_volume, write_volume};
use rio::volume::{invert_tsdf, Patch, PatchPair, PatchPairSpec};
use rio::workflow::*;
use rio::RigidPose;

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix().into_inner()
}

/// Angle between two rotations via the chordal distance, which stays accurate
/// for tiny angles where `acos` of the trace would not.
fn angle_between_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let chord = (a - b).norm() / (2.0 * 2f64.sqrt());
    (2.0 * chord.min(1.0).asin()).to_degrees()
}

const KABSCH_TRIALS: usize = 1000;
const KABSCH_ROT_TOL_DEG: f64 = 1e-6;
const KABSCH_TRANS_TOL_M: f64 = 1e-9;
const KABSCH_BUDGET: Duration = Duration::from_secs(5);

#[test]
fn criterion_1_kabsch_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let started = Instant::now();
    let (mut worst_r, mut worst_t) = (0.0f64, 0.0f64);
    for _ in 0..KABSCH_TRIALS {
        let r = random_rotation(&mut rng);
        let t = Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0));
        let n = rng.random_range(10..=100);
        let corrs: Vec<_> = (0..n)
            .map(|_| {
                let p = Point3::from(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
                Correspondence::new(p, Point3::from(r * p.coords + t))
            })
            .collect();
        let est = kabsch(&corrs).unwrap();
        worst_r = worst_r.max(angle_between_deg(&est.rotation, &r));
        worst_t = worst_t.max((est.translation - t).norm());
    }
    let elapsed = started.elapsed();
    let pass = worst_r < KABSCH_ROT_TOL_DEG && worst_t < KABSCH_TRANS_TOL_M && elapsed < KABSCH_BUDGET;
    verdict(1, pass, &format!("{KABSCH_TRIALS} instances, worst {worst_r:.2e}° / {worst_t:.2e} m in {elapsed:.2?}"));
    assert!(pass);
}

const GRAD_INSTANCES: usize = 20;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-5;
/// Gradients below this are compared in absolute terms.
const GRAD_ABS_FLOOR: f64 = 1e-5;
const GRAD_PARAMS_PER_BRANCH: usize = 48;
const GRAD_BUDGET: Duration = Duration::from_secs(60);

fn random_patch_pair(rng: &mut impl Rng, res: usize) -> PatchPair {
    let mut patch = |extent| {
        let v = (0..res * res * res).map(|_| rng.random_range(0.0..1.0f32)).collect();
        Patch::from_values(res, extent, true, v).unwrap()
    };
    PatchPair { fine: patch(0.6), coarse: patch(1.2) }
}

/// Largest relative disagreement between backprop and central differences of
/// the mean loss, over a random sample of each branch's parameters.
fn worst_gradient_error(
    model: &mut DescriptorModel<f64>,
    batch: &[TrainingTriplet],
    loss: &TripletLossConfig,
    rng: &mut impl Rng,
) -> f64 {
    let analytic = backward(model, batch, loss).unwrap().gradients;
    let mut worst = 0.0f64;
    for b in 0..analytic.branches.len() {
        let n = analytic.branches[b].len();
        let picks: Vec<usize> =
            if n <= GRAD_PARAMS_PER_BRANCH { (0..n).collect() } else { (0..GRAD_PARAMS_PER_BRANCH).map(|_| rng.random_range(0..n)).collect() };
        for i in picks {
            let orig = model.branches()[b].params()[i];
            model.branches_mut()[b].params_mut()[i] = orig + GRAD_STEP;
            let up = backward(model, batch, loss).unwrap().loss;
            model.branches_mut()[b].params_mut()[i] = orig - GRAD_STEP;
            let down = backward(model, batch, loss).unwrap().loss;
            model.branches_mut()[b].params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * GRAD_STEP);
            let a = analytic.branches[b][i];
            let scale = a.abs().max(numeric.abs()).max(GRAD_ABS_FLOOR);
            let e = (a - numeric).abs() / scale;
            worst = worst.max(e);
        }
    }
    worst
}

#[test]
fn criterion_2_gradient_checks() {
    use LayerSpec::*;
    let res = 8;
    // each stack isolates one layer type next to the linear head it needs
    let stacks: [(&str, Vec<LayerSpec>); 4] = [
        ("conv", vec![Conv3 { out: 2 }, Linear { out: 3 }]),
        ("pool", vec![MaxPool2, Linear { out: 3 }]),
        ("relu", vec![Linear { out: 6 }, Relu, Linear { out: 3 }]),
        ("fc", vec![Linear { out: 4 }]),
    ];
    // the margin keeps the hinge active so every parameter gets a gradient,
    // while the loss stays small enough for clean differences
    let loss = TripletLossConfig { margin: 5.0, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let started = Instant::now();
    let mut worst = Vec::new();
    for (name, sse) in &stacks {
        let mut w = 0.0f64;
        for inst in 0..GRAD_INSTANCES {
            let spec = ModelSpec {
                input_resolution: res,
                sse: sse.clone(),
                // a linear head keeps ReLU kinks out of every stack but the relu one
                mse: vec![Linear { out: 4 }],
                scales: ScaleMode::Multi,
                patch: PatchPairSpec { fine_extent: 0.6, coarse_extent: 1.2, resolution: res },
            };
            let mut model = DescriptorModel::<f64>::new(spec, inst as u64).unwrap();
            let batch: Vec<_> = (0..2)
                .map(|_| TrainingTriplet {
                    anchor: random_patch_pair(&mut rng, res),
                    positive: random_patch_pair(&mut rng, res),
                    negative: random_patch_pair(&mut rng, res),
                    provenance: Provenance::Static,
                })
                .collect();
            w = w.max(worst_gradient_error(&mut model, &batch, &loss, &mut rng));
        }
        worst.push((*name, w));
    }
    let elapsed = started.elapsed();
    let pass = worst.iter().all(|(_, w)| *w < GRAD_REL_TOL) && elapsed < GRAD_BUDGET;
    let detail: Vec<_> = worst.iter().map(|(n, w)| format!("{n} {w:.1e}")).collect();
    verdict(2, pass, &format!("{GRAD_INSTANCES} instances per layer type, worst relative error {}, {elapsed:.2?}", detail.join(", ")));
    assert!(pass);
}

const RANSAC_TRIALS: usize = 100;
const RANSAC_MIN_OK: usize = 99;
const RANSAC_ROT_TOL_DEG: f64 = 1.0;
const RANSAC_TRANS_TOL_M: f64 = 0.01;

fn ransac_trial(trial: u64) -> (RigidPose, Option<RigidPose>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
    let truth = RigidPose::new(random_rotation(&mut rng), Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)));
    let mut corrs = Vec::new();
    for i in 0..100 {
        let p = Point3::from(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
        let q = if i % 2 == 0 {
            truth.transform_point(&p)
        } else {
            Point3::from(truth.translation + Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)))
        };
        corrs.push(Correspondence::new(p, q));
    }
    let cfg = RansacConfig { seed: trial, ..Default::default() };
    (truth, ransac_align(&corrs, &cfg).ok().map(|r| r.pose))
}

#[test]
fn criterion_3_ransac_robustness() {
    let mut ok = 0;
    let mut deterministic = true;
    for trial in 0..RANSAC_TRIALS as u64 {
        let (truth, est) = ransac_trial(trial);
        deterministic &= ransac_trial(trial).1 == est;
        if let Some(est) = est {
            let r = angle_between_deg(&est.rotation, &truth.rotation);
            let t = (est.translation - truth.translation).norm();
            ok += (r <= RANSAC_ROT_TOL_DEG && t <= RANSAC_TRANS_TOL_M) as usize;
        }
    }
    let pass = ok >= RANSAC_MIN_OK && deterministic;
    verdict(3, pass, &format!("{ok}/{RANSAC_TRIALS} within 1 cm / 1°, deterministic: {deterministic}"));
    assert!(pass);
}

const E2E_SCENES: usize = 50;
const E2E_CORPUS_SEED: u64 = 7;
const E2E_OBJECTS: usize = 7;
const E2E_MOVE_FRACTION: f64 = 0.9;
/// 40 training and 10 test scenes; the default ratio would leave only 5 for testing.
const E2E_SPLIT: SplitRatio = SplitRatio { train: 40, val: 0, test: 10 };
const E2E_STATIC_PER_SCENE: usize = 20;
const E2E_DYNAMIC_PER_SCENE: usize = 40;
const E2E_STATIC_EPOCHS: u32 = 2;
const E2E_DYNAMIC_EPOCHS: u32 = 4;
const E2E_MIN_RECALL: f64 = 60.0;
const E2E_BUDGET: Duration = Duration::from_secs(30 * 60);

/// Recall at (20 cm, 20°) on the test split.
fn e2e_recall(descriptor: &dyn Descriptor, test: &[ScenePair], config: &RelocalizeConfig) -> f64 {
    let mut predictions = Vec::new();
    for p in test {
        let out = predict_scan_pair(
            descriptor,
            &p.reference_volume().unwrap(),
            &p.rescan_volume().unwrap(),
            &p.scan_pair_id(),
            &p.queries(),
            config,
        )
        .unwrap();
        predictions.extend(out.into_iter().map(|o| o.prediction));
    }
    let gt: Vec<_> = test.iter().map(ScenePair::ground_truth).collect();
    let report = benchmark(&predictions, &gt, &ClassMap::default(), &DEFAULT_THRESHOLDS).unwrap();
    report.thresholds[1].recall
}

fn e2e_trained(scales: ScaleMode, static_set: &[TrainingTriplet], dynamic_set: &[TrainingTriplet]) -> DescriptorModel<f32> {
    let loss = TripletLossConfig::default();
    let mut model = DescriptorModel::<f32>::new(ModelSpec::default().with_scales(scales), 0).unwrap();
    let stages = [
        (static_set, E2E_STATIC_EPOCHS, Freeze::None, Stage::Static, 3),
        (dynamic_set, E2E_DYNAMIC_EPOCHS, Freeze::SseFrozen, Stage::Dynamic, 4),
    ];
    for (set, epochs, freeze, stage, seed) in stages {
        train(&mut model, set, &loss, &TrainOptions { epochs, freeze, stage, seed }).unwrap();
    }
    model
}

#[test]
fn criterion_4_end_to_end_benchmark() {
    let started = Instant::now();
    let mut corpus = CorpusConfig { scenes: E2E_SCENES, seed: E2E_CORPUS_SEED, ..Default::default() };
    corpus.scene.objects = E2E_OBJECTS;
    corpus.changes.rotation_axis = RotationAxis::Vertical;
    corpus.changes.move_fraction = E2E_MOVE_FRACTION;
    corpus.changes.remove_fraction = 0.1;
    corpus.split_ratio = E2E_SPLIT;
    let pairs = generate_corpus(&corpus).unwrap();
    let split = |s: Split| pairs.iter().filter(|p| p.manifest.split == s).cloned().collect::<Vec<_>>();
    let (train_pairs, test) = (split(Split::Train), split(Split::Test));
    let sets = TrainingSetConfig {
        static_per_scene: E2E_STATIC_PER_SCENE,
        dynamic_per_scene: E2E_DYNAMIC_PER_SCENE,
        ..Default::default()
    };
    let static_set = static_training_set(&train_pairs, &sets, 1).unwrap();
    let dynamic_set = dynamic_training_set(&train_pairs, &sets, 2).unwrap();

    let config = RelocalizeConfig::default();
    let multi_model = e2e_trained(ScaleMode::Multi, &static_set, &dynamic_set);
    let multi = e2e_recall(&multi_model, &test, &config);
    drop(multi_model);
    let single = e2e_recall(&e2e_trained(ScaleMode::Coarse, &static_set, &dynamic_set), &test, &config);
    let random_features = RandomDescriptor { dim: ModelSpec::default().feature_dim(), seed: 1 };
    let random = e2e_recall(&random_features, &test, &config);
    let elapsed = started.elapsed();

    let pass = multi > random && multi > single && multi >= E2E_MIN_RECALL && elapsed < E2E_BUDGET;
    verdict(
        4,
        pass,
        &format!(
            "{} test pairs, recall @ 20 cm / 20°: multi-scale {multi:.1}%, single-scale {single:.1}%, random {random:.1}%, {elapsed:.0?}",
            test.len()
        ),
    );
    assert!(pass);
}

fn rz(deg: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), deg.to_radians()).into_inner()
}

fn record(id: u32, gt: RigidPose, ambiguity: Vec<RigidPose>) -> InstanceRecord {
    InstanceRecord {
        instance_id: id,
        class_label: "chair".into(),
        gt_pose: gt,
        symmetry: SymmetryClass::none(),
        ambiguity_poses: ambiguity,
    }
}

fn prediction(id: u32, pose: RigidPose, status: PredictionStatus) -> Prediction {
    Prediction { scan_pair_id: "scene/0".into(), instance_id: id, pose, status }
}

#[test]
fn criterion_5_metric_units() {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let none = SymmetryClass::none();
    let c2 = SymmetryClass::new(SymmetryKind::C2, Vector3::z()).unwrap();
    let c4 = SymmetryClass::new(SymmetryKind::C4, Vector3::z()).unwrap();
    let r_gt = random_rotation(&mut ChaCha8Rng::seed_from_u64(5));
    let turned = r_gt * rz(90.0);

    check("identical rotation", rotation_error(&r_gt, &r_gt, &none).unwrap() == 0.0);
    check("C4 quarter turn", rotation_error(&turned, &r_gt, &c4).unwrap() < 1e-6);
    // exhaustive minimum over the C2 group elements
    let c2_oracle = (0..2).map(|k| angle_between_deg(&turned, &(r_gt * rz(180.0 * k as f64)))).fold(f64::MAX, f64::min);
    let c2_err = rotation_error(&turned, &r_gt, &c2).unwrap();
    check("C2 quarter turn", (c2_err - 90.0).abs() < 1e-6 && (c2_err - c2_oracle).abs() < 1e-6);

    check("equal translations", translation_error(&Vector3::new(1.0, 2.0, 3.0), &Vector3::new(1.0, 2.0, 3.0)) == 0.0);
    check(
        "10 cm offset",
        (translation_error(&Vector3::new(1.1, 2.0, 3.0), &Vector3::new(1.0, 2.0, 3.0)) - 0.1).abs() < 1e-12,
    );

    let off = RigidPose::new(rz(5.0), Vector3::new(0.15, 0.0, 0.0));
    let j = judge_instance(&prediction(0, off, PredictionStatus::Ok), &record(0, RigidPose::identity(), vec![RigidPose::identity()]), &DEFAULT_THRESHOLDS)
        .unwrap();
    check("threshold pairs", j.hits == vec![false, true]);

    // chair 0 stands where chair 1 was: the swap is an ambiguity pose
    let swap = RigidPose::from_translation(Vector3::new(1.0, 0.0, 0.0));
    let rec = record(0, RigidPose::identity(), vec![RigidPose::identity(), swap]);
    let j = judge_instance(&prediction(0, swap, PredictionStatus::Ok), &rec, &DEFAULT_THRESHOLDS).unwrap();
    check("interchangeable chairs", j.hits == vec![true, true]);

    // hand-computed report: errors (5 cm, 5°), (15 cm, 15°), (25 cm, 25°) and one failure
    let gt = GroundTruthManifest {
        scan_pair_id: "scene/0".into(),
        instances: (0..4).map(|i| record(i, RigidPose::identity(), vec![RigidPose::identity()])).collect(),
    };
    let mut preds: Vec<_> = [0.05, 0.15, 0.25]
        .iter()
        .enumerate()
        .map(|(i, &e)| prediction(i as u32, RigidPose::new(rz(e * 100.0), Vector3::new(e, 0.0, 0.0)), PredictionStatus::Ok))
        .collect();
    preds.push(prediction(3, RigidPose::identity(), PredictionStatus::Failed));
    let report = benchmark(&preds, &[gt], &ClassMap::default(), &DEFAULT_THRESHOLDS).unwrap();
    let near = |a: Option<f64>, b: f64| a.is_some_and(|a| (a - b).abs() < 1e-6);
    check("report recall", (report.thresholds[0].recall - 25.0).abs() < 1e-6 && (report.thresholds[1].recall - 50.0).abs() < 1e-6);
    check("report MTE", near(report.thresholds[1].mte_m, 0.15));
    check("report MRE", near(report.thresholds[1].mre_deg, 15.0));
    check("report counts", report.instances == 4 && report.failed == 1);

    let pass = failures.is_empty();
    verdict(5, pass, &if pass { "all metric cases exact".to_string() } else { format!("failed: {}", failures.join(", ")) });
    assert!(pass);
}

/// Exhaustive oracle: evaluate every candidate threshold independently.
fn sweep_oracle(pos: &[f64], neg: &[f64]) -> (f64, usize, usize, usize, usize) {
    let mut cands: Vec<f64> = pos.iter().chain(neg).copied().collect();
    cands.sort_by(f64::total_cmp);
    for t in cands {
        let tp = pos.iter().filter(|&&d| d <= t).count();
        if tp as f64 >= 0.95 * pos.len() as f64 - 1e-9 {
            let fp = neg.iter().filter(|&&d| d <= t).count();
            return (t, tp, fp, neg.len() - fp, pos.len() - tp);
        }
    }
    unreachable!()
}

#[test]
fn criterion_6_matching_metrics_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut min_recall = f64::MAX;
    let cases = 200;
    for case in 0..cases {
        let np = rng.random_range(1..200);
        let nn = rng.random_range(0..200);
        // alternate separated, overlapping and identical distributions; rounding creates ties
        let shift = [3.0, 0.5, 0.0][case % 3];
        let pos: Vec<f64> = (0..np).map(|_| (rng.random_range(0.0..1.0f64) * 50.0).round() / 50.0).collect();
        let neg: Vec<f64> = (0..nn).map(|_| (rng.random_range(0.0..1.0f64) * 50.0).round() / 50.0 + shift).collect();
        let m = keypoint_matching_metrics(&pos, &neg).unwrap();
        let (t, tp, fp, tn, fn_) = sweep_oracle(&pos, &neg);
        let total = (tp + fp + tn + fn_) as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / np as f64;
        let f1 = 2.0 * precision * recall / (precision + recall);
        let fpr = if fp + tn == 0 { 0.0 } else { fp as f64 / (fp + tn) as f64 };
        let same = m.threshold == t
            && (m.confusion.tp, m.confusion.fp, m.confusion.tn, m.confusion.r#fn) == (tp, fp, tn, fn_)
            && m.precision == precision
            && m.recall == recall
            && (m.f1 - f1).abs() < 1e-15
            && m.accuracy == (tp + tn) as f64 / total
            && m.fpr == fpr
            && m.error_rate == (fp + fn_) as f64 / total;
        mismatches += !same as usize;
        min_recall = min_recall.min(m.recall);
    }
    let pass = mismatches == 0 && min_recall >= 0.95;
    verdict(6, pass, &format!("{cases} distributions, {mismatches} mismatches, lowest operating recall {min_recall:.4}"));
    assert!(pass);
}

#[test]
fn criterion_7_format_fidelity() {
    let mut problems = Vec::new();
    let dir = tempfile::tempdir().unwrap();

    let mut cfg = CorpusConfig { scenes: 3, seed: 21, ..Default::default() };
    cfg.scene.objects = 4;
    let pairs = generate_corpus(&cfg).unwrap();

    let volume = pairs[0].rescan_volume().unwrap();
    let mut bytes = Vec::new();
    write_volume(&mut bytes, &volume).unwrap();
    let back = read_volume(bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_volume(&mut again, &back).unwrap();
    let bits_equal = back.values().iter().zip(volume.values()).all(|(a, b)| a.to_bits() == b.to_bits());
    if bytes != again || !bits_equal || back.grid() != volume.grid() {
        problems.push("volume");
    }

    let mut model = DescriptorModel::<f32>::new(ModelSpec::default(), 4).unwrap();
    model.meta.stage = Stage::Dynamic;
    let mut bytes = Vec::new();
    write_model(&mut bytes, &model).unwrap();
    let back = read_model(bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_model(&mut again, &back).unwrap();
    if bytes != again || back != model {
        problems.push("model");
    }

    let manifest = pairs[1].scene_manifest();
    let path = dir.path().join("manifest.json");
    save_scan_manifest(&path, &manifest).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back = load_scan_manifest(&path).unwrap();
    save_scan_manifest(&path, &back).unwrap();
    if back != manifest || std::fs::read(&path).unwrap() != first {
        problems.push("manifest");
    }

    let hidden = dir.path().join("hidden");
    export_benchmark_bundle(&pairs, &hidden, true).unwrap();
    let mut leaked = Vec::new();
    for entry in walk(&hidden) {
        if entry.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&entry).unwrap();
            if text.contains("gt_pose") || text.contains("ambiguity_poses") {
                leaked.push(entry.display().to_string());
            }
        }
    }
    if !leaked.is_empty() || hidden.join("ground_truth.json").exists() {
        problems.push("hidden bundle");
    }

    let pass = problems.is_empty();
    verdict(7, pass, &if pass { "volume, model and manifest round-trip; hidden bundle has no poses".into() } else { format!("failed: {}", problems.join(", ")) });
    assert!(pass);
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn criterion_8_defaults() {
    let mut failures = Vec::new();
    let inverted = invert_tsdf(&Patch::from_values(8, 0.6, false, [0.0, 1.0, -1.0, -0.5].repeat(128)).unwrap());
    if inverted.values()[..4] != [1.0, 0.0, 0.0, 0.5] || !inverted.is_inverted() {
        failures.push("inversion");
    }
    let spec = PatchPairSpec::default();
    if (spec.fine_voxel_size() - 0.01875).abs() > 1e-7 || (spec.coarse_voxel_size() - 0.0375).abs() > 1e-7 || spec.resolution != 32 {
        failures.push("patch voxel sizes");
    }
    let loss = TripletLossConfig::default();
    if loss.margin != 1.0 || loss.learning_rate != 0.001 {
        failures.push("loss defaults");
    }
    let model = ModelSpec::default();
    if model.patch != spec || model.input_resolution != 32 {
        failures.push("model input");
    }
    let pass = failures.is_empty();
    verdict(8, pass, &if pass { "fine 1.875 cm, coarse 3.75 cm, margin 1, lr 0.001, inversion 1 - |v|".into() } else { format!("failed: {}", failures.join(", ")) });
    assert!(pass);
}
