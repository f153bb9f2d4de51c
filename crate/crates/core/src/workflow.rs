//! End-to-end glue: training sets from synthetic scene pairs and
//! predictions over scan pairs. The CLI and the benchmark tests share it.

use log::{debug, warn};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasynth::{look_at, render_depth, ChangeKind, QueryObject, ScenePair, SyntheticScene};
use crate::descriptor::{Descriptor, DescriptorModel, Real};
use crate::error::{invalid, Result, RioError};
use crate::evaluation::{topk_metric, Prediction, PredictionStatus};
use crate::keypoints::{
    detect_keypoints, sample_dynamic_triplets, sample_static_triplets, DynamicInstance, NegativePool,
    TrainingTriplet, TripletConfig,
};
use crate::pose::RigidPose;
use crate::registration::{describe_scene, relocalize_with_features, RelocalizeConfig, RelocalizeDiagnostics};
use crate::volume::{CameraIntrinsics, DepthFrame, PatchPair, TsdfVolume};

/// Virtual depth camera used to produce the partial scans for static pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub horizontal_fov_deg: f64,
    pub max_depth: f64,
    /// Camera height above the floor.
    pub eye_height: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { frames: 8, width: 96, height: 72, horizontal_fov_deg: 80.0, max_depth: 6.0, eye_height: 1.1 }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.horizontal_fov_deg > 0.0 && self.horizontal_fov_deg < 180.0) {
            return invalid("render size must be positive and the field of view in (0°, 180°)");
        }
        if !(self.max_depth > 0.0) {
            return invalid("max_depth must be positive");
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        let f = self.width as f64 / 2.0 / (self.horizontal_fov_deg.to_radians() / 2.0).tan();
        CameraIntrinsics { fx: f, fy: f, cx: (self.width as f64 - 1.0) / 2.0, cy: (self.height as f64 - 1.0) / 2.0 }
    }
}

/// Depth frames from cameras spread around the inside of the room, each
/// looking at a random floor point near the center.
pub fn render_scan_frames(scene: &SyntheticScene, config: &RenderConfig, seed: u64) -> Result<Vec<DepthFrame>> {
    config.validate()?;
    let room = scene.room.ok_or_else(|| RioError::InvalidArgument("scene has no room".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.intrinsics();
    (0..config.frames)
        .map(|i| {
            let a = std::f64::consts::TAU * (i as f64 + rng.random_range(-0.3..0.3)) / config.frames.max(1) as f64;
            let eye = Point3::new(0.85 * room.half_x * a.cos(), 0.85 * room.half_y * a.sin(), config.eye_height);
            let target = Point3::new(
                rng.random_range(-0.3..0.3) * room.half_x,
                rng.random_range(-0.3..0.3) * room.half_y,
                0.0,
            );
            let pose = look_at(eye, target)?;
            Ok(render_depth(scene, k, pose, config.width, config.height, config.max_depth))
        })
        .collect()
}

/// Sizes of the two training sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSetConfig {
    pub triplets: TripletConfig,
    pub render: RenderConfig,
    pub static_per_scene: usize,
    pub dynamic_per_scene: usize,
}

impl Default for TrainingSetConfig {
    fn default() -> Self {
        TrainingSetConfig {
            triplets: TripletConfig::default(),
            render: RenderConfig::default(),
            static_per_scene: 40,
            dynamic_per_scene: 60,
        }
    }
}

fn scene_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15)
}

/// Static triplets: each scene's reference is rendered, the frames are split
/// into two fusions, and negatives come from the next scene in the list.
pub fn static_training_set(pairs: &[ScenePair], config: &TrainingSetConfig, seed: u64) -> Result<Vec<TrainingTriplet>> {
    let mut out = Vec::new();
    if pairs.len() < 2 {
        return invalid("static training needs at least two scenes (negatives come from another scene)");
    }
    for (i, pair) in pairs.iter().enumerate() {
        let grid = pair.grid()?;
        let frames = render_scan_frames(&pair.manifest.reference, &config.render, scene_seed(seed, i))?;
        let other = pairs[(i + 1) % pairs.len()].reference_volume()?;
        let pool = NegativePool::new(&[&other], config.triplets.harris.surface_band);
        let batch =
            sample_static_triplets(&frames, &grid, &pool, &config.triplets, config.static_per_scene, scene_seed(seed, i))?;
        for d in &batch.diagnostics {
            debug!("{}: {d}", pair.scene_id);
        }
        out.extend(batch.triplets);
    }
    Ok(out)
}

/// Instances of a scene pair as the dynamic sampler sees them.
pub fn dynamic_instances(pair: &ScenePair) -> Vec<DynamicInstance> {
    pair.manifest
        .changes
        .iter()
        .filter_map(|c| {
            let obj = pair.manifest.reference.object(c.instance_id)?;
            let segment = obj.segment(pair.scan.segment_margin);
            match c.kind {
                ChangeKind::Moved => {
                    Some(DynamicInstance { instance_id: c.instance_id, segment, gt_pose: c.gt_pose, removed: false })
                }
                ChangeKind::Removed => {
                    Some(DynamicInstance { instance_id: c.instance_id, segment, gt_pose: None, removed: true })
                }
                ChangeKind::Added => None,
            }
        })
        .collect()
}

/// Dynamic triplets from the moved objects of every pair; negatives come
/// from the next scene and from sites of removed objects.
pub fn dynamic_training_set(pairs: &[ScenePair], config: &TrainingSetConfig, seed: u64) -> Result<Vec<TrainingTriplet>> {
    let mut out = Vec::new();
    if pairs.len() < 2 {
        return invalid("dynamic training needs at least two scenes (negatives come from another scene)");
    }
    for (i, pair) in pairs.iter().enumerate() {
        let reference = pair.reference_volume()?;
        let rescan = pair.rescan_volume()?;
        let other = pairs[(i + 1) % pairs.len()].rescan_volume()?;
        let batch = sample_dynamic_triplets(
            &reference,
            &rescan,
            &dynamic_instances(pair),
            &[&other],
            &config.triplets,
            config.dynamic_per_scene,
            scene_seed(seed, i),
        )?;
        for d in &batch.diagnostics {
            debug!("{}: {d}", pair.scene_id);
        }
        out.extend(batch.triplets);
    }
    Ok(out)
}

/// Outcome of one query object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub prediction: Prediction,
    /// Why the alignment failed, if it did.
    pub failure: Option<String>,
    pub diagnostics: Option<RelocalizeDiagnostics>,
}

/// Re-localizes every query object of one scan pair. Alignment failures and
/// objects with too few keypoints become `failed` rows; anything else is an
/// error.
pub fn predict_scan_pair<D: Descriptor + ?Sized>(
    descriptor: &D,
    reference: &TsdfVolume,
    rescan: &TsdfVolume,
    scan_pair_id: &str,
    queries: &[QueryObject],
    config: &RelocalizeConfig,
) -> Result<Vec<QueryOutcome>> {
    config.validate()?;
    let source_keypoints = detect_keypoints(reference, &config.harris, config.nms_radius)?;
    let target = describe_scene(descriptor, rescan, config)?;
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let row = |pose, status| Prediction { scan_pair_id: scan_pair_id.to_string(), instance_id: q.instance_id, pose, status };
        match relocalize_with_features(descriptor, reference, &source_keypoints, &q.segment, &target, config) {
            Ok((pose, diag)) => {
                out.push(QueryOutcome { prediction: row(pose, PredictionStatus::Ok), failure: None, diagnostics: Some(diag) })
            }
            Err(e @ (RioError::AlignmentFailure(_) | RioError::ObjectTooSmall { .. })) => {
                warn!("{scan_pair_id}/{}: {e}", q.instance_id);
                out.push(QueryOutcome {
                    prediction: row(RigidPose::identity(), PredictionStatus::Failed),
                    failure: Some(e.to_string()),
                    diagnostics: None,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Descriptor distances of every anchor/positive and anchor/negative pair of
/// `triplets`, plus the top-1 placement rate of each positive among up to 50
/// negatives taken from the other triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingEvaluation {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
    pub top1: Option<f64>,
}

pub fn evaluate_matching<T: Real>(model: &DescriptorModel<T>, triplets: &[TrainingTriplet]) -> Result<MatchingEvaluation> {
    let embed = |p: &PatchPair| model.forward(&p.fine, &p.coarse);
    let mut anchors = Vec::with_capacity(triplets.len());
    let mut positives = Vec::with_capacity(triplets.len());
    let mut negatives = Vec::with_capacity(triplets.len());
    for t in triplets {
        anchors.push(embed(&t.anchor)?);
        positives.push(embed(&t.positive)?);
        negatives.push(embed(&t.negative)?);
    }
    let dist = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt();
    let positive = anchors.iter().zip(&positives).map(|(a, p)| dist(a, p)).collect();
    let negative = anchors.iter().zip(&negatives).map(|(a, n)| dist(a, n)).collect();
    let top1 = if triplets.len() < 2 {
        None
    } else {
        let mut hits = 0usize;
        for i in 0..triplets.len() {
            // the next 50 triplets' negatives, wrapping around
            let pool: Vec<Vec<f32>> =
                (1..triplets.len()).take(50).map(|k| negatives[(i + k) % triplets.len()].clone()).collect();
            hits += topk_metric(&anchors[i], &positives[i], &pool, 1)? as usize;
        }
        Some(hits as f64 / triplets.len() as f64)
    };
    Ok(MatchingEvaluation { positive, negative, top1 })
}
