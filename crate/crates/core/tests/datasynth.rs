use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rio::datasynth::*;
use rio::RioError;

fn small_corpus(scenes: usize, seed: u64) -> Vec<ScenePair> {
    let config = CorpusConfig {
        scenes,
        seed,
        scene: SceneConfig { room: Room { half_x: 0.8, half_y: 0.8, height: 0.8 }, objects: 3, ..SceneConfig::default() },
        scan: ScanConfig { voxel_size: 0.04, ..ScanConfig::default() },
        ..CorpusConfig::default()
    };
    generate_corpus(&config).unwrap()
}

#[test]
fn placed_objects_keep_their_clearance() {
    let config = SceneConfig { objects: 4, ..SceneConfig::default() };
    for seed in 0..20 {
        let scene = generate_scene(&config, seed).unwrap();
        let room = scene.room.unwrap();
        for (i, a) in scene.objects.iter().enumerate() {
            let ra = a.primitive.bounding_radius();
            assert!(room.contains_xy(&a.center(), ra + config.clearance), "seed {seed}: object {} leaves the room", a.id);
            for b in &scene.objects[i + 1..] {
                let gap = Vector2::new(a.center().x - b.center().x, a.center().y - b.center().y).norm();
                assert!(gap >= ra + b.primitive.bounding_radius() + config.clearance - 1e-12, "seed {seed}: {} and {}", a.id, b.id);
            }
        }
        assert_eq!(scene, generate_scene(&config, seed).unwrap());
    }
}

#[test]
fn moved_objects_are_the_same_surface_under_the_ground_truth_pose() {
    let shapes = SceneConfig { objects: 4, ..SceneConfig::default() };
    let changes = ChangeConfig { move_fraction: 0.7, ..ChangeConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..10 {
        let scene = generate_scene(&shapes, seed).unwrap();
        let (_, manifest) = apply_changes(&scene, &changes, &shapes, seed + 100).unwrap();
        assert!(manifest.violations().is_empty(), "{:?}", manifest.violations());
        let moved: Vec<_> = manifest.changes.iter().filter(|c| c.kind == ChangeKind::Moved).collect();
        assert!(!moved.is_empty());
        for c in moved {
            let gt = c.gt_pose.unwrap();
            let (a, b) = (manifest.reference.object(c.instance_id).unwrap(), manifest.rescan.object(c.instance_id).unwrap());
            for _ in 0..50 {
                let p = a.center() + Vector3::from(std::array::from_fn::<f64, 3, _>(|_| rng.random_range(-0.4..0.4)));
                let q = gt.transform_point(&p);
                assert!((a.distance(&p) - b.distance(&q)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn removed_and_added_objects_are_listed_where_they_exist() {
    let shapes = SceneConfig { objects: 4, ..SceneConfig::default() };
    let changes = ChangeConfig { move_fraction: 0.3, remove_fraction: 0.3, add_fraction: 0.3, ..ChangeConfig::default() };
    let scene = generate_scene(&shapes, 5).unwrap();
    let (_, m) = apply_changes(&scene, &changes, &shapes, 6).unwrap();
    for c in &m.changes {
        let (r, n) = (m.reference.object(c.instance_id).is_some(), m.rescan.object(c.instance_id).is_some());
        match c.kind {
            ChangeKind::Removed => assert!(r && !n),
            ChangeKind::Added => assert!(!r && n && c.gt_pose.is_none()),
            _ => assert!(r && n),
        }
    }
}

#[test]
fn reflected_ground_truth_is_rejected_naming_every_instance() {
    let pair = &small_corpus(1, 2)[0];
    let mut doc = serde_json::to_value(pair.scene_manifest()).unwrap();
    let instances = doc["rescans"][0]["instances"].as_array_mut().unwrap();
    assert!(instances.len() >= 2, "need two changed instances");
    let mut ids = Vec::new();
    for inst in instances.iter_mut().take(2) {
        inst["gt_pose"]["rotation"] = serde_json::json!([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]);
        ids.push(inst["instance_id"].as_u64().unwrap());
    }
    match parse_scan_manifest(&doc) {
        Err(RioError::Schema(v)) => {
            for id in ids {
                assert!(v.iter().any(|m| m.contains(&format!("instance {id}"))), "{id} not in {v:?}");
            }
        }
        other => panic!("expected schema violations, got {other:?}"),
    }
}

fn files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reloaded_bundle_re_exports_byte_identically() {
    let pairs = small_corpus(2, 4);
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    export_benchmark_bundle(&pairs, &a, false).unwrap();
    let bundle = load_bundle(&a).unwrap();
    assert_eq!(bundle.ground_truth(), pairs.iter().map(ScenePair::ground_truth).collect::<Vec<_>>());
    export_benchmark_bundle(&bundle.scene_pairs(None).unwrap(), &b, false).unwrap();
    assert_eq!(files(&a), files(&b));
}

#[test]
fn hidden_bundle_keeps_inputs_and_drops_answers() {
    let pairs = small_corpus(2, 4);
    let tmp = tempfile::tempdir().unwrap();
    let (full, hidden) = (tmp.path().join("full"), tmp.path().join("hidden"));
    export_benchmark_bundle(&pairs, &full, false).unwrap();
    export_benchmark_bundle(&pairs, &hidden, true).unwrap();
    let (f, h) = (files(&full), files(&hidden));
    assert!(!h.iter().any(|(n, _)| n == "ground_truth.json"));
    for (name, bytes) in &h {
        if name.ends_with(".tsdf") {
            assert_eq!(Some(bytes), f.iter().find(|(n, _)| n == name).map(|(_, b)| b), "{name}");
        } else {
            let text = String::from_utf8(bytes.clone()).unwrap();
            assert!(!text.contains("gt_pose") && !text.contains("ambiguity_poses"), "{name}");
        }
    }
    let loaded = load_bundle(&hidden).unwrap();
    assert!(loaded.ground_truth().is_empty());
    let scene = &loaded.scenes[0];
    assert_eq!(scene.rescans[0].queries, pairs[0].queries());
    assert_eq!(loaded.reference_volume(scene).unwrap(), pairs[0].reference_volume().unwrap());
}
