use serde::{Deserialize, Serialize};

use super::{rotation_error, translation_error, SymmetryClass};
use crate::error::{Result, RioError};
use crate::pose::RigidPose;

/// Ground truth for one changed object instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: u32,
    pub class_label: String,
    /// Maps the object from the reference scan into the re-scan.
    pub gt_pose: RigidPose,
    pub symmetry: SymmetryClass,
    /// Alternative solutions `a`; each candidate ground truth is `gt_pose ∘ a`.
    /// Always contains the identity.
    pub ambiguity_poses: Vec<RigidPose>,
}

impl InstanceRecord {
    pub fn candidates(&self) -> impl Iterator<Item = RigidPose> + '_ {
        self.ambiguity_poses.iter().map(|a| self.gt_pose.compose(a))
    }

    /// Every invariant violation, prefixed with the instance id.
    pub fn violations(&self) -> Vec<String> {
        let id = self.instance_id;
        let mut out = Vec::new();
        if let Err(e) = self.gt_pose.validate() {
            out.push(format!("instance {id}: gt_pose: {e}"));
        }
        if !self.symmetry.is_normalized() {
            out.push(format!("instance {id}: symmetry axis is not normalized"));
        }
        for (i, a) in self.ambiguity_poses.iter().enumerate() {
            if let Err(e) = a.validate() {
                out.push(format!("instance {id}: ambiguity_poses[{i}]: {e}"));
            }
        }
        let has_identity = self
            .ambiguity_poses
            .iter()
            .any(|a| (a.rotation - nalgebra::Matrix3::identity()).norm() < 1e-9 && a.translation.norm() < 1e-9);
        if !has_identity {
            out.push(format!("instance {id}: ambiguity_poses must include the identity"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionStatus {
    Ok,
    Failed,
}

/// One row of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scan_pair_id: String,
    pub instance_id: u32,
    #[serde(flatten)]
    pub pose: RigidPose,
    pub status: PredictionStatus,
}

/// A success criterion: both errors must be within the bounds (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub translation_m: f64,
    pub rotation_deg: f64,
}

/// `(0.1 m, 10°)` and `(0.2 m, 20°)`.
pub const DEFAULT_THRESHOLDS: [ThresholdPair; 2] = [
    ThresholdPair { translation_m: 0.1, rotation_deg: 10.0 },
    ThresholdPair { translation_m: 0.2, rotation_deg: 20.0 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub instance_id: u32,
    pub failed: bool,
    /// Errors of the best ambiguity candidate; `None` for failed predictions.
    pub rotation_error_deg: Option<f64>,
    pub translation_error_m: Option<f64>,
    pub candidate: Option<usize>,
    /// Hit flags, one per threshold pair.
    pub hits: Vec<bool>,
}

/// Scores a prediction against every ambiguity candidate of the record and
/// keeps the one with the lowest rotation error, then translation error,
/// then list order.
pub fn judge_instance(prediction: &Prediction, record: &InstanceRecord, thresholds: &[ThresholdPair]) -> Result<Judgement> {
    if prediction.instance_id != record.instance_id {
        return Err(RioError::Scoring(format!(
            "prediction for instance {} scored against record {}",
            prediction.instance_id, record.instance_id
        )));
    }
    if prediction.status == PredictionStatus::Failed {
        return Ok(Judgement {
            instance_id: record.instance_id,
            failed: true,
            rotation_error_deg: None,
            translation_error_m: None,
            candidate: None,
            hits: vec![false; thresholds.len()],
        });
    }
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, cand) in record.candidates().enumerate() {
        let r = rotation_error(&prediction.pose.rotation, &cand.rotation, &record.symmetry)?;
        let t = translation_error(&prediction.pose.translation, &cand.translation);
        let better = match best {
            None => true,
            Some((br, bt, _)) => r < br || (r == br && t < bt),
        };
        if better {
            best = Some((r, t, i));
        }
    }
    let (r, t, i) = best.ok_or_else(|| RioError::Scoring(format!("instance {} has no ambiguity poses", record.instance_id)))?;
    Ok(Judgement {
        instance_id: record.instance_id,
        failed: false,
        rotation_error_deg: Some(r),
        translation_error_m: Some(t),
        candidate: Some(i),
        hits: thresholds.iter().map(|th| t <= th.translation_m && r <= th.rotation_deg).collect(),
    })
}
