use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{class_label_for, place, SceneConfig, SceneObject, SyntheticScene};
use super::Split;
use crate::error::{invalid, Result, RioError};
use crate::evaluation::InstanceRecord;
use crate::pose::{axis_angle_matrix, RigidPose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Moved,
    Removed,
    Added,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub instance_id: u32,
    pub kind: ChangeKind,
    /// Reference-to-rescan motion of a moved object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_pose: Option<RigidPose>,
}

/// Axis about which moved objects are re-oriented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RotationAxis {
    /// Uniform on the sphere; the object is then set down on its lowest point.
    #[default]
    Random,
    /// World up: objects keep their resting face, like furniture pushed around.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChangeConfig {
    pub move_fraction: f64,
    pub remove_fraction: f64,
    pub add_fraction: f64,
    /// Horizontal displacement of a moved object's center, meters.
    pub translation_range: [f64; 2],
    pub rotation_range_deg: [f64; 2],
    pub rotation_axis: RotationAxis,
    pub max_attempts: usize,
}

impl Default for ChangeConfig {
    fn default() -> Self {
        ChangeConfig {
            move_fraction: 0.5,
            remove_fraction: 0.1,
            add_fraction: 0.1,
            translation_range: [0.02, 3.0],
            rotation_range_deg: [0.0, 180.0],
            rotation_axis: RotationAxis::Random,
            max_attempts: 2000,
        }
    }
}

impl ChangeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("move", self.move_fraction), ("remove", self.remove_fraction), ("add", self.add_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return invalid(format!("{name} fraction must lie in [0, 1], got {f}"));
            }
        }
        if self.move_fraction + self.remove_fraction > 1.0 + 1e-12 {
            return invalid("move and remove fractions together exceed 1");
        }
        let [t0, t1] = self.translation_range;
        let [r0, r1] = self.rotation_range_deg;
        if !(t0 >= 0.0 && t1 >= t0) || !(r0 >= 0.0 && r1 >= r0 && r1 <= 180.0) {
            return invalid("translation and rotation ranges must be ordered, non-negative, rotation ≤ 180°");
        }
        Ok(())
    }
}

/// A reference scene, its re-scan and what changed in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePairManifest {
    pub reference: SyntheticScene,
    pub rescan: SyntheticScene,
    pub changes: Vec<Change>,
    pub split: Split,
}

impl ScenePairManifest {
    /// Ground-truth records of every moved object, with symmetry and the
    /// ambiguity set: shape self-symmetries and swaps with identical objects.
    pub fn instance_records(&self) -> Vec<InstanceRecord> {
        self.changes
            .iter()
            .filter_map(|c| {
                let gt = c.gt_pose?;
                let obj = self.reference.object(c.instance_id)?;
                Some(instance_record(obj, &gt, &self.rescan))
            })
            .collect()
    }

    /// Checks the manifest invariants: moved objects exist in both scenes
    /// with consistent poses, removed ones only in the reference, added ones
    /// only in the re-scan.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.changes {
            let id = c.instance_id;
            let (in_ref, in_new) = (self.reference.object(id), self.rescan.object(id));
            match c.kind {
                ChangeKind::Moved => match (in_ref, in_new, c.gt_pose) {
                    (Some(a), Some(b), Some(t)) => {
                        let mapped = t.compose(&a.pose);
                        if (mapped.rotation - b.pose.rotation).norm() > 1e-9
                            || (mapped.translation - b.pose.translation).norm() > 1e-9
                        {
                            out.push(format!("instance {id}: gt_pose does not map the reference pose onto the rescan pose"));
                        }
                    }
                    (_, _, None) => out.push(format!("instance {id}: moved without gt_pose")),
                    _ => out.push(format!("instance {id}: moved but missing from one scene")),
                },
                ChangeKind::Removed if in_ref.is_none() || in_new.is_some() => {
                    out.push(format!("instance {id}: removed objects must exist only in the reference"))
                }
                ChangeKind::Added if in_ref.is_some() || in_new.is_none() => {
                    out.push(format!("instance {id}: added objects must exist only in the rescan"))
                }
                _ => {}
            }
        }
        out
    }
}

fn instance_record(obj: &SceneObject, gt: &RigidPose, rescan: &SyntheticScene) -> InstanceRecord {
    let p_old = obj.pose;
    let p_old_inv = p_old.inverse();
    let gt_inv = gt.inverse();
    let syms = obj.primitive.discrete_symmetries();
    let mut ambiguity = Vec::new();
    // the object itself first so the identity leads the list
    let mut twins: Vec<&SceneObject> = rescan.objects.iter().filter(|o| o.id == obj.id).collect();
    twins.extend(rescan.objects.iter().filter(|o| o.id != obj.id && o.primitive.same_shape(&obj.primitive)));
    for twin in twins {
        for s in &syms {
            let alt = twin.pose.compose(&RigidPose::from_rotation(*s)).compose(&p_old_inv);
            let mut a = gt_inv.compose(&alt);
            if twin.id == obj.id && *s == Matrix3::identity() {
                a = RigidPose::identity();
            }
            ambiguity.push(a);
        }
    }
    InstanceRecord {
        instance_id: obj.id,
        class_label: obj.class_label.clone(),
        gt_pose: *gt,
        symmetry: obj.symmetry,
        ambiguity_poses: ambiguity,
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn sample_range(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Moves, removes and adds objects of `scene`.
///
/// Objects are picked in a seeded random order: the first
/// `round(n·move_fraction)` move, the next `round(n·remove_fraction)` vanish,
/// and `round(n·add_fraction)` new objects appear. Moved objects keep resting
/// on the floor; the recorded `gt_pose` maps the reference object exactly
/// onto its re-scan placement.
pub fn apply_changes(
    scene: &SyntheticScene,
    change: &ChangeConfig,
    shapes: &SceneConfig,
    seed: u64,
) -> Result<(SyntheticScene, ScenePairManifest)> {
    change.validate()?;
    let room = scene
        .room
        .ok_or_else(|| RioError::InvalidArgument("apply_changes needs a scene with a room".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scene.objects.len();
    let n_move = (n as f64 * change.move_fraction).round() as usize;
    let n_remove = ((n as f64 * change.remove_fraction).round() as usize).min(n - n_move);
    let n_add = (n as f64 * change.add_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let moving: Vec<usize> = order[..n_move].to_vec();
    let removed: Vec<usize> = order[n_move..n_move + n_remove].to_vec();

    let mut placed: Vec<SceneObject> = (0..n)
        .filter(|i| !moving.contains(i) && !removed.contains(i))
        .map(|i| scene.objects[i].clone())
        .collect();
    let mut changes = Vec::new();
    let [t_lo, t_hi] = change.translation_range;
    for &i in &moving {
        let obj = &scene.objects[i];
        let mut done = None;
        for _ in 0..change.max_attempts {
            let angle = sample_range(&mut rng, change.rotation_range_deg).to_radians();
            let axis = match change.rotation_axis {
                RotationAxis::Random => random_unit(&mut rng),
                RotationAxis::Vertical => Vector3::z(),
            };
            let rot = axis_angle_matrix(axis, angle) * obj.pose.rotation;
            let dist = sample_range(&mut rng, [t_lo, t_hi]);
            let dir = rng.random_range(0.0..std::f64::consts::TAU);
            let c = obj.center();
            let target = (c.x + dist * dir.cos(), c.y + dist * dir.sin());
            if let Some(pose) = place(&mut rng, &room, &placed, &obj.primitive, rot, shapes.clearance, |_| target, 1) {
                done = Some(pose);
                break;
            }
        }
        let pose = done.ok_or_else(|| {
            RioError::Generation(format!("could not find a free spot for moved object {} after {} attempts", obj.id, change.max_attempts))
        })?;
        let gt = pose.compose(&obj.pose.inverse());
        let moved = SceneObject::new(obj.id, obj.class_label.clone(), obj.primitive, pose);
        changes.push(Change { instance_id: obj.id, kind: ChangeKind::Moved, gt_pose: Some(gt) });
        placed.push(moved);
    }
    for &i in &removed {
        changes.push(Change { instance_id: scene.objects[i].id, kind: ChangeKind::Removed, gt_pose: None });
    }
    let mut next = scene.next_id();
    for _ in 0..n_add {
        let primitive = super::scene::random_primitive(&mut rng, shapes);
        let rot = axis_angle_matrix(Vector3::z(), rng.random_range(0.0..std::f64::consts::TAU));
        let (hx, hy) = (room.half_x, room.half_y);
        let pose = place(
            &mut rng,
            &room,
            &placed,
            &primitive,
            rot,
            shapes.clearance,
            |r| (r.random_range(-hx..hx), r.random_range(-hy..hy)),
            shapes.max_attempts,
        )
        .ok_or_else(|| RioError::Generation(format!("could not place added object {next}")))?;
        placed.push(SceneObject::new(next, class_label_for(&primitive).into(), primitive, pose));
        changes.push(Change { instance_id: next, kind: ChangeKind::Added, gt_pose: None });
        next += 1;
    }
    placed.sort_by_key(|o| o.id);
    changes.sort_by_key(|c| c.instance_id);
    let rescan = SyntheticScene { room: Some(room), objects: placed, seed };
    let manifest = ScenePairManifest { reference: scene.clone(), rescan: rescan.clone(), changes, split: Split::Train };
    Ok((rescan, manifest))
}
