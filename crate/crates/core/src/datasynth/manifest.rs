//! Versioned scan manifests ("3rscan-lite/1").

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::changes::{Change, ChangeKind};
use super::scene::SyntheticScene;
use super::Split;
use crate::error::{Result, RioError};
use crate::evaluation::{GroundTruthManifest, InstanceRecord};
use crate::keypoints::ObjectSegment;

pub const SCHEMA: &str = "3rscan-lite/1";

/// An object to re-localize: where it is in the reference scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryObject {
    pub instance_id: u32,
    pub class_label: String,
    pub segment: ObjectSegment,
}

/// One re-scan of a scene. The ground-truth fields are absent in hidden
/// bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescanEntry {
    pub scan_pair_id: String,
    /// Volume file, relative to the manifest's directory.
    pub path: String,
    pub queries: Vec<QueryObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changes: Option<Vec<Change>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<InstanceRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SyntheticScene>,
}

impl RescanEntry {
    pub fn ground_truth(&self) -> Option<GroundTruthManifest> {
        Some(GroundTruthManifest { scan_pair_id: self.scan_pair_id.clone(), instances: self.instances.clone()? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema: String,
    pub scene_id: String,
    pub split: Split,
    /// Volume file, relative to the manifest's directory.
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_scene: Option<SyntheticScene>,
    pub rescans: Vec<RescanEntry>,
}

impl SceneManifest {
    /// Copy without any ground truth: no poses, changes or scene layouts.
    pub fn hidden(&self) -> SceneManifest {
        SceneManifest {
            reference_scene: None,
            rescans: self
                .rescans
                .iter()
                .map(|r| RescanEntry { changes: None, instances: None, scene: None, ..r.clone() })
                .collect(),
            ..self.clone()
        }
    }
}

fn describe(v: &Value, i: usize) -> String {
    match v.get("instance_id").and_then(Value::as_u64) {
        Some(id) => format!("instance {id}"),
        None => format!("instances[{i}]"),
    }
}

/// Every schema violation of a parsed manifest document.
pub fn manifest_violations(doc: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    match doc.get("schema").and_then(Value::as_str) {
        Some(SCHEMA) => {}
        Some(s) => errs.push(format!("schema: unsupported version {s:?}, expected {SCHEMA:?}")),
        None => errs.push("schema: missing".into()),
    }
    let rescans = doc.get("rescans").and_then(Value::as_array).cloned().unwrap_or_default();
    for (ri, r) in rescans.iter().enumerate() {
        let pair = r.get("scan_pair_id").and_then(Value::as_str).map_or(format!("rescans[{ri}]"), str::to_string);
        if let Some(instances) = r.get("instances").and_then(Value::as_array) {
            for (i, inst) in instances.iter().enumerate() {
                match serde_json::from_value::<InstanceRecord>(inst.clone()) {
                    Ok(rec) => errs.extend(rec.violations().into_iter().map(|e| format!("{pair}: {e}"))),
                    Err(e) => errs.push(format!("{pair}: {}: {e}", describe(inst, i))),
                }
            }
        }
        if let Some(changes) = r.get("changes").and_then(Value::as_array) {
            for (i, c) in changes.iter().enumerate() {
                match serde_json::from_value::<Change>(c.clone()) {
                    Ok(Change { kind: ChangeKind::Moved, gt_pose: None, instance_id }) => {
                        errs.push(format!("{pair}: instance {instance_id}: moved without gt_pose"))
                    }
                    Ok(Change { gt_pose: Some(p), instance_id, .. }) => {
                        if let Err(e) = p.validate() {
                            errs.push(format!("{pair}: instance {instance_id}: gt_pose: {e}"));
                        }
                    }
                    Ok(_) => {}
                    Err(e) => errs.push(format!("{pair}: changes[{i}]: {e}")),
                }
            }
        }
    }
    if errs.is_empty() {
        if let Err(e) = serde_json::from_value::<SceneManifest>(doc.clone()) {
            errs.push(e.to_string());
        }
    }
    errs
}

/// Reads and validates one scene manifest, reporting all violations at once.
pub fn load_scan_manifest(path: impl AsRef<Path>) -> Result<SceneManifest> {
    let path = path.as_ref();
    let doc: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    parse_scan_manifest(&doc).map_err(|e| match e {
        RioError::Schema(v) => RioError::Schema(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
        other => other,
    })
}

pub fn parse_scan_manifest(doc: &Value) -> Result<SceneManifest> {
    let errs = manifest_violations(doc);
    if !errs.is_empty() {
        return Err(RioError::Schema(errs));
    }
    Ok(serde_json::from_value(doc.clone())?)
}

pub fn save_scan_manifest(path: impl AsRef<Path>, manifest: &SceneManifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}
