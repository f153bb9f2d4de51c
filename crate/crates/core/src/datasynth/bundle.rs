//! Synthetic corpora and the on-disk benchmark bundle.
//!
//! Layout: `scenes/<id>/{reference.tsdf, rescan-N.tsdf, manifest.json}`,
//! `splits.json` (scene id → split), `scan.json` (volume resolution) and
//! `predictions_template.json`. Full bundles also carry `ground_truth.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::changes::{apply_changes, ChangeConfig, ScenePairManifest};
use super::manifest::{load_scan_manifest, save_scan_manifest, QueryObject, RescanEntry, SceneManifest, SCHEMA};
use super::scene::{generate_scene, SceneConfig};
use super::{assign_splits, Split, SplitRatio};
use crate::error::{invalid, Result, RioError};
use crate::evaluation::{GroundTruthManifest, Prediction, PredictionStatus};
use crate::pose::RigidPose;
use crate::volume::io::{load_volume, save_volume};
use crate::volume::{analytic_tsdf, TsdfVolume, VolumeGrid, DEFAULT_TRUNCATION};

/// Scan resolution and object segmentation margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub voxel_size: f32,
    pub truncation: f32,
    /// Wall and floor thickness included in the volume.
    pub margin: f64,
    /// Growth of object bounding boxes when selecting keypoints.
    pub segment_margin: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { voxel_size: 0.025, truncation: DEFAULT_TRUNCATION, margin: 0.1, segment_margin: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub scenes: usize,
    pub scene: SceneConfig,
    pub changes: ChangeConfig,
    pub scan: ScanConfig,
    pub split_ratio: SplitRatio,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            scenes: 10,
            scene: SceneConfig::default(),
            changes: ChangeConfig::default(),
            scan: ScanConfig::default(),
            split_ratio: SplitRatio::default(),
            seed: 0,
        }
    }
}

/// One generated scene with a single re-scan. Volumes are computed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair {
    pub scene_id: String,
    pub manifest: ScenePairManifest,
    pub scan: ScanConfig,
}

impl ScenePair {
    /// Inverse of [`ScenePair::scene_manifest`]. Needs the ground-truth
    /// fields, so hidden manifests are rejected.
    pub fn from_manifest(scene: &SceneManifest, scan: ScanConfig) -> Result<ScenePair> {
        let missing = || RioError::InvalidArgument(format!("scene {}: manifest has no ground truth", scene.scene_id));
        let [rescan] = scene.rescans.as_slice() else {
            return invalid(format!("scene {}: expected exactly one re-scan", scene.scene_id));
        };
        let manifest = ScenePairManifest {
            reference: scene.reference_scene.clone().ok_or_else(missing)?,
            rescan: rescan.scene.clone().ok_or_else(missing)?,
            changes: rescan.changes.clone().ok_or_else(missing)?,
            split: scene.split,
        };
        Ok(ScenePair { scene_id: scene.scene_id.clone(), manifest, scan })
    }

    pub fn scan_pair_id(&self) -> String {
        format!("{}/rescan-0", self.scene_id)
    }

    pub fn grid(&self) -> Result<VolumeGrid> {
        let room = self
            .manifest
            .reference
            .room
            .ok_or_else(|| RioError::InvalidArgument("scene has no room".into()))?;
        room.grid(self.scan.voxel_size, self.scan.truncation, self.scan.margin)
    }

    pub fn reference_volume(&self) -> Result<TsdfVolume> {
        analytic_tsdf(&self.manifest.reference, &self.grid()?)
    }

    pub fn rescan_volume(&self) -> Result<TsdfVolume> {
        analytic_tsdf(&self.manifest.rescan, &self.grid()?)
    }

    /// Objects to re-localize: every moved instance.
    pub fn queries(&self) -> Vec<QueryObject> {
        self.manifest
            .instance_records()
            .iter()
            .filter_map(|r| {
                let o = self.manifest.reference.object(r.instance_id)?;
                Some(QueryObject {
                    instance_id: o.id,
                    class_label: o.class_label.clone(),
                    segment: o.segment(self.scan.segment_margin),
                })
            })
            .collect()
    }

    pub fn ground_truth(&self) -> GroundTruthManifest {
        GroundTruthManifest { scan_pair_id: self.scan_pair_id(), instances: self.manifest.instance_records() }
    }

    pub fn scene_manifest(&self) -> SceneManifest {
        SceneManifest {
            schema: SCHEMA.into(),
            scene_id: self.scene_id.clone(),
            split: self.manifest.split,
            reference: "reference.tsdf".into(),
            reference_scene: Some(self.manifest.reference.clone()),
            rescans: vec![RescanEntry {
                scan_pair_id: self.scan_pair_id(),
                path: "rescan-0.tsdf".into(),
                queries: self.queries(),
                changes: Some(self.manifest.changes.clone()),
                instances: Some(self.manifest.instance_records()),
                scene: Some(self.manifest.rescan.clone()),
            }],
        }
    }
}

fn sub_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 step keeps per-scene seeds decorrelated
    let mut z = seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(i + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generates `scenes` scene pairs. A scene whose layout or changes cannot be
/// placed is retried with a fresh sub-seed (up to 8 times).
pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<ScenePair>> {
    let splits = assign_splits(config.scenes, &config.split_ratio, config.seed)?;
    let mut out = Vec::with_capacity(config.scenes);
    for (i, split) in splits.into_iter().enumerate() {
        let mut last = None;
        for attempt in 0..8u64 {
            let s = sub_seed(config.seed, (i as u64) << 8 | attempt);
            let made = generate_scene(&config.scene, s)
                .and_then(|scene| apply_changes(&scene, &config.changes, &config.scene, s ^ 0x5eed));
            match made {
                Ok((_, mut manifest)) => {
                    manifest.split = split;
                    out.push(ScenePair { scene_id: format!("scene-{i:04}"), manifest, scan: config.scan });
                    last = None;
                    break;
                }
                Err(e @ RioError::Generation(_)) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        if let Some(e) = last {
            return Err(e);
        }
    }
    Ok(out)
}

/// Writes a bundle. `hidden` strips every ground-truth field and skips
/// `ground_truth.json`.
pub fn export_benchmark_bundle(pairs: &[ScenePair], out: impl AsRef<Path>, hidden: bool) -> Result<()> {
    let out = out.as_ref();
    fs::create_dir_all(out.join("scenes"))
        .map_err(|e| RioError::InvalidArgument(format!("cannot create bundle directory {}: {e}", out.display())))?;
    if let Some(p) = pairs.iter().find(|p| p.scan != pairs[0].scan) {
        return invalid(format!("scene {} uses a different scan configuration than {}", p.scene_id, pairs[0].scene_id));
    }
    let mut splits = BTreeMap::new();
    let mut template = Vec::new();
    let mut gts = Vec::new();
    for p in pairs {
        let dir = out.join("scenes").join(&p.scene_id);
        fs::create_dir_all(&dir)?;
        save_volume(dir.join("reference.tsdf"), &p.reference_volume()?)?;
        save_volume(dir.join("rescan-0.tsdf"), &p.rescan_volume()?)?;
        let full = p.scene_manifest();
        save_scan_manifest(dir.join("manifest.json"), &if hidden { full.hidden() } else { full })?;
        splits.insert(p.scene_id.clone(), p.manifest.split);
        for q in p.queries() {
            template.push(Prediction {
                scan_pair_id: p.scan_pair_id(),
                instance_id: q.instance_id,
                pose: RigidPose::identity(),
                status: PredictionStatus::Failed,
            });
        }
        gts.push(p.ground_truth());
    }
    write_json(out.join("splits.json"), &splits)?;
    write_json(out.join("scan.json"), &pairs.first().map_or_else(ScanConfig::default, |p| p.scan))?;
    write_json(out.join("predictions_template.json"), &template)?;
    if !hidden {
        write_json(out.join("ground_truth.json"), &gts)?;
    }
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: PathBuf, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// A bundle read back from disk.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub root: PathBuf,
    pub splits: BTreeMap<String, Split>,
    pub scan: ScanConfig,
    pub scenes: Vec<SceneManifest>,
}

impl Bundle {
    pub fn scene_dir(&self, scene_id: &str) -> PathBuf {
        self.root.join("scenes").join(scene_id)
    }

    pub fn reference_volume(&self, scene: &SceneManifest) -> Result<TsdfVolume> {
        load_volume(self.scene_dir(&scene.scene_id).join(&scene.reference))
    }

    pub fn rescan_volume(&self, scene: &SceneManifest, rescan: &RescanEntry) -> Result<TsdfVolume> {
        load_volume(self.scene_dir(&scene.scene_id).join(&rescan.path))
    }

    pub fn ground_truth(&self) -> Vec<GroundTruthManifest> {
        self.scenes.iter().flat_map(|s| s.rescans.iter().filter_map(RescanEntry::ground_truth)).collect()
    }

    pub fn scenes_in(&self, split: Split) -> impl Iterator<Item = &SceneManifest> {
        self.scenes.iter().filter(move |s| s.split == split)
    }

    /// Scene pairs rebuilt from the manifests; fails on hidden bundles.
    pub fn scene_pairs(&self, split: Option<Split>) -> Result<Vec<ScenePair>> {
        self.scenes
            .iter()
            .filter(|s| split.is_none_or(|x| s.split == x))
            .map(|s| ScenePair::from_manifest(s, self.scan))
            .collect()
    }
}

/// Loads `splits.json` and every listed scene manifest, collecting schema
/// violations across all scenes.
pub fn load_bundle(root: impl AsRef<Path>) -> Result<Bundle> {
    let root = root.as_ref().to_path_buf();
    let splits: BTreeMap<String, Split> = serde_json::from_slice(&fs::read(root.join("splits.json"))?)?;
    let scan: ScanConfig = serde_json::from_slice(&fs::read(root.join("scan.json"))?)?;
    let mut scenes = Vec::new();
    let mut errs = Vec::new();
    for id in splits.keys() {
        match load_scan_manifest(root.join("scenes").join(id).join("manifest.json")) {
            Ok(m) => {
                if &m.scene_id != id {
                    errs.push(format!("scene {id}: manifest names scene {:?}", m.scene_id));
                }
                scenes.push(m);
            }
            Err(RioError::Schema(v)) => errs.extend(v),
            Err(e) => return Err(e),
        }
    }
    if !errs.is_empty() {
        return Err(RioError::Schema(errs));
    }
    if scenes.is_empty() {
        return invalid(format!("bundle at {} lists no scenes", root.display()));
    }
    Ok(Bundle { root, splits, scan, scenes })
}
