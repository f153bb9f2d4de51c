use serde::{Deserialize, Serialize};

use super::{match_knn, ransac_align, Correspondence, FeatureMatrix, RansacConfig};
use crate::descriptor::Descriptor;
use crate::error::{invalid, Result, RioError};
use crate::keypoints::{detect_keypoints, HarrisConfig, Keypoint, ObjectSegment};
use crate::pose::RigidPose;
use crate::volume::TsdfVolume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelocalizeConfig {
    pub harris: HarrisConfig,
    pub nms_radius: f64,
    /// Neighbors per object keypoint in feature space.
    pub k: usize,
    pub min_keypoints: usize,
    pub ransac: RansacConfig,
}

impl Default for RelocalizeConfig {
    fn default() -> Self {
        RelocalizeConfig {
            harris: HarrisConfig::default(),
            nms_radius: 0.1,
            k: 4,
            min_keypoints: 8,
            ransac: RansacConfig::default(),
        }
    }
}

impl RelocalizeConfig {
    pub fn validate(&self) -> Result<()> {
        self.harris.validate()?;
        self.ransac.validate()?;
        if !(self.nms_radius > 0.0) {
            return invalid("nms_radius must be positive");
        }
        if self.k == 0 || self.min_keypoints < 3 {
            return invalid("k must be positive and min_keypoints at least 3");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RelocalizeDiagnostics {
    pub object_keypoints: usize,
    pub scene_keypoints: usize,
    pub matches: usize,
    pub inliers: usize,
    pub inlier_ratio: f64,
}

/// Keypoints of a whole scan with their features, computed once per scan.
#[derive(Debug, Clone)]
pub struct SceneFeatures {
    pub keypoints: Vec<Keypoint>,
    pub features: FeatureMatrix,
}

pub fn describe_scene<D: Descriptor + ?Sized>(descriptor: &D, volume: &TsdfVolume, config: &RelocalizeConfig) -> Result<SceneFeatures> {
    config.validate()?;
    let keypoints = detect_keypoints(volume, &config.harris, config.nms_radius)?;
    let features = descriptor.describe(volume, &keypoints)?;
    Ok(SceneFeatures { keypoints, features })
}

/// Re-localizes one object given its source keypoints (already restricted to
/// the object or not; the segment filter is applied here) and precomputed
/// target-scene features.
pub fn relocalize_with_features<D: Descriptor + ?Sized>(
    descriptor: &D,
    source: &TsdfVolume,
    source_keypoints: &[Keypoint],
    segment: &ObjectSegment,
    target: &SceneFeatures,
    config: &RelocalizeConfig,
) -> Result<(RigidPose, RelocalizeDiagnostics)> {
    config.validate()?;
    let object = segment.select(source_keypoints);
    let mut diag = RelocalizeDiagnostics {
        object_keypoints: object.len(),
        scene_keypoints: target.keypoints.len(),
        ..Default::default()
    };
    if object.len() < config.min_keypoints {
        return Err(RioError::ObjectTooSmall { found: object.len(), required: config.min_keypoints });
    }
    let features = descriptor.describe(source, &object)?;
    let matches = match_knn(&features, &target.features, config.k)?;
    diag.matches = matches.len();
    let corrs: Vec<Correspondence> = matches
        .iter()
        .map(|m| Correspondence {
            source_point: object[m.source].position,
            target_point: target.keypoints[m.target].position,
            descriptor_distance: m.distance,
        })
        .collect();
    let res = ransac_align(&corrs, &config.ransac)?;
    diag.inliers = res.inliers.len();
    diag.inlier_ratio = res.inliers.len() as f64 / corrs.len() as f64;
    Ok((res.pose, diag))
}

/// Pose mapping the segmented object of `source` into `target`.
pub fn relocalize_instance<D: Descriptor + ?Sized>(
    descriptor: &D,
    source: &TsdfVolume,
    segment: &ObjectSegment,
    target: &TsdfVolume,
    config: &RelocalizeConfig,
) -> Result<(RigidPose, RelocalizeDiagnostics)> {
    config.validate()?;
    let source_keypoints = detect_keypoints(source, &config.harris, config.nms_radius)?;
    let scene = describe_scene(descriptor, target, config)?;
    relocalize_with_features(descriptor, source, &source_keypoints, segment, &scene, config)
}
