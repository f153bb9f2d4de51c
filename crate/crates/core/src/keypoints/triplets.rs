//! Training triplets from pairs of volumes: static (two partial fusions of one
//! scene) and dynamic (objects that moved between a scan and its re-scan).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use nalgebra::Point3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{nms, HarrisConfig, Keypoint, ObjectSegment, ResponseField};
use crate::error::{invalid, Result, RioError};
use crate::pose::RigidPose;
use crate::volume::io::{load_volume, save_volume};
use crate::volume::{
    extract_two_scale, fuse_depth, CubeRotation, DepthFrame, Patch, PatchPair, PatchPairSpec, TsdfVolume, VolumeGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Static,
    Dynamic,
}

/// Anchor and positive show the same surface locality, the negative does not.
/// All patches are inverted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriplet {
    pub anchor: PatchPair,
    pub positive: PatchPair,
    pub negative: PatchPair,
    pub provenance: Provenance,
}

/// How anchor/positive pairs are rotated before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    None,
    /// One of the 24 axis-aligned rotations, exact.
    #[default]
    Cube,
    /// One of the 4 axis-aligned rotations about the vertical (z) axis, exact.
    /// Suits corpora whose objects only turn about gravity.
    Vertical,
    /// Uniformly random rotation, trilinear resampling.
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripletConfig {
    pub harris: HarrisConfig,
    pub nms_radius: f64,
    /// Search radius when re-detecting a keypoint on the second volume.
    /// Defaults to two fine-scale voxels.
    pub pairing_radius: f64,
    pub patch: PatchPairSpec,
    pub augmentation: Augmentation,
}

impl Default for TripletConfig {
    fn default() -> Self {
        let patch = PatchPairSpec::default();
        TripletConfig {
            harris: HarrisConfig::default(),
            nms_radius: 0.1,
            pairing_radius: 2.0 * patch.fine_voxel_size() as f64,
            patch,
            augmentation: Augmentation::Cube,
        }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> Result<()> {
        self.harris.validate()?;
        self.patch.validate()?;
        if !(self.nms_radius > 0.0) || !(self.pairing_radius > 0.0) {
            return invalid("nms and pairing radii must be positive");
        }
        Ok(())
    }
}

/// Triplets plus notes on anything skipped.
#[derive(Debug, Clone, Default)]
pub struct TripletBatch {
    pub triplets: Vec<TrainingTriplet>,
    pub diagnostics: Vec<String>,
}

/// Harris keypoints thinned by non-maxima suppression.
pub fn detect_keypoints(volume: &TsdfVolume, harris: &HarrisConfig, nms_radius: f64) -> Result<Vec<Keypoint>> {
    let field = ResponseField::compute(volume, harris)?;
    nms(&field.keypoints(harris.min_response), nms_radius)
}

/// Keypoints that are also the maximum of their own pairing neighbourhood,
/// so refining them on an identical volume returns them unchanged.
fn stable_keypoints(field: &ResponseField, config: &TripletConfig) -> Result<Vec<Keypoint>> {
    let kps = nms(&field.keypoints(config.harris.min_response), config.nms_radius)?;
    Ok(kps
        .into_iter()
        .filter(|k| field.best_within(&k.position, config.pairing_radius).is_some_and(|b| b.position == k.position))
        .collect())
}

/// Random surface locations of other scenes, used as negatives.
pub struct NegativePool<'a> {
    volumes: Vec<&'a TsdfVolume>,
    surfaces: Vec<Vec<usize>>,
    /// Extra negative centers inside the primary volumes (removed-object sites).
    sites: Vec<(&'a TsdfVolume, Point3<f64>)>,
}

impl<'a> NegativePool<'a> {
    pub fn new(volumes: &[&'a TsdfVolume], band: f32) -> Self {
        let volumes: Vec<&TsdfVolume> = volumes.iter().copied().filter(|v| !v.is_degenerate()).collect();
        let surfaces = volumes.iter().map(|v| v.surface_voxels(band)).collect();
        NegativePool { volumes, surfaces, sites: Vec::new() }
    }

    pub fn with_sites(mut self, sites: Vec<(&'a TsdfVolume, Point3<f64>)>) -> Self {
        self.sites = sites;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty() && self.sites.is_empty()
    }

    fn draw(&self, rng: &mut ChaCha8Rng, spec: &PatchPairSpec) -> Result<PatchPair> {
        let use_site = !self.sites.is_empty() && (self.volumes.is_empty() || rng.random_bool(0.5));
        if use_site {
            let (v, c) = self.sites[rng.random_range(0..self.sites.len())];
            return extract_two_scale(v, &c, spec);
        }
        let i = rng.random_range(0..self.volumes.len());
        let surf = &self.surfaces[i];
        let g = self.volumes[i].grid();
        let [x, y, z] = g.coords(surf[rng.random_range(0..surf.len())]);
        extract_two_scale(self.volumes[i], &g.voxel_center(x, y, z), spec)
    }
}

fn augment(pair: &PatchPair, rot: Option<&Augmented>) -> PatchPair {
    match rot {
        None => pair.clone(),
        Some(Augmented::Cube(r)) => pair.rotate_cube(r),
        Some(Augmented::Arbitrary(m)) => pair.rotate_trilinear(m),
    }
}

enum Augmented {
    Cube(CubeRotation),
    Arbitrary(nalgebra::Matrix3<f64>),
}

fn draw_rotation(rng: &mut ChaCha8Rng, aug: Augmentation, cube: &[CubeRotation]) -> Option<Augmented> {
    match aug {
        Augmentation::None => None,
        Augmentation::Cube => Some(Augmented::Cube(cube[rng.random_range(0..cube.len())])),
        Augmentation::Vertical => {
            let upright: Vec<_> = cube.iter().filter(|r| r.matrix()[(2, 2)] == 1.0).collect();
            Some(Augmented::Cube(*upright[rng.random_range(0..upright.len())]))
        }
        Augmentation::Arbitrary => {
            let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                gaussian(rng),
                gaussian(rng),
                gaussian(rng),
                gaussian(rng),
            ));
            Some(Augmented::Arbitrary(q.to_rotation_matrix().into_inner()))
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Anchor/positive world locations, before patches are cut.
struct Pairing {
    anchor: Point3<f64>,
    positive: Point3<f64>,
}

#[allow(clippy::too_many_arguments)]
fn emit(
    pairs: &mut [Pairing],
    vol_a: &TsdfVolume,
    vol_b: &TsdfVolume,
    negatives: &NegativePool,
    config: &TripletConfig,
    count: usize,
    provenance: Provenance,
    rng: &mut ChaCha8Rng,
    out: &mut TripletBatch,
) -> Result<()> {
    if pairs.is_empty() || count == 0 {
        return Ok(());
    }
    if negatives.is_empty() {
        out.diagnostics.push("no negative source available".into());
        return Ok(());
    }
    pairs.shuffle(rng);
    let cube = CubeRotation::all();
    // without augmentation a pair can only be used once
    let n = if config.augmentation == Augmentation::None { count.min(pairs.len()) } else { count };
    let mut cut: Vec<Option<(PatchPair, PatchPair)>> = vec![None; pairs.len()];
    for i in 0..n {
        let j = i % pairs.len();
        if cut[j].is_none() {
            let a = extract_two_scale(vol_a, &pairs[j].anchor, &config.patch)?;
            let p = extract_two_scale(vol_b, &pairs[j].positive, &config.patch)?;
            cut[j] = Some((a, p));
        }
        let (a, p) = cut[j].as_ref().expect("cut above");
        // the first pass keeps the original orientation
        let rot = if i < pairs.len() { None } else { draw_rotation(rng, config.augmentation, &cube) };
        let negative = negatives.draw(rng, &config.patch)?;
        out.triplets.push(TrainingTriplet {
            anchor: augment(a, rot.as_ref()),
            positive: augment(p, rot.as_ref()),
            negative,
            provenance,
        });
    }
    Ok(())
}

/// Static triplets from two volumes of the same, unchanged scene.
pub fn static_triplets_from_pair(
    vol_a: &TsdfVolume,
    vol_b: &TsdfVolume,
    negatives: &NegativePool,
    config: &TripletConfig,
    count: usize,
    seed: u64,
) -> Result<TripletBatch> {
    config.validate()?;
    let mut out = TripletBatch::default();
    if count == 0 {
        return Ok(out);
    }
    let field_a = ResponseField::compute(vol_a, &config.harris)?;
    let field_b = ResponseField::compute(vol_b, &config.harris)?;
    let mut pairs = Vec::new();
    let mut rejected = 0;
    for kp in stable_keypoints(&field_a, config)? {
        match field_b.refine(&kp, config.pairing_radius, config.harris.pairing_fraction) {
            Some(r) => pairs.push(Pairing { anchor: kp.position, positive: r.position }),
            None => rejected += 1,
        }
    }
    if rejected > 0 {
        out.diagnostics.push(format!("{rejected} keypoints had no counterpart on the second volume"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    emit(&mut pairs, vol_a, vol_b, negatives, config, count, Provenance::Static, &mut rng, &mut out)?;
    Ok(out)
}

/// Splits `frames` into even and odd halves, fuses each and pairs keypoints
/// across the two fusions.
pub fn sample_static_triplets(
    frames: &[DepthFrame],
    grid: &VolumeGrid,
    negatives: &NegativePool,
    config: &TripletConfig,
    count: usize,
    seed: u64,
) -> Result<TripletBatch> {
    let usable: Vec<DepthFrame> = frames.iter().filter(|f| f.validate().is_ok()).cloned().collect();
    if usable.len() < 2 {
        return Ok(TripletBatch {
            triplets: Vec::new(),
            diagnostics: vec![format!("need at least 2 usable frames, got {}", usable.len())],
        });
    }
    let a: Vec<DepthFrame> = usable.iter().step_by(2).cloned().collect();
    let b: Vec<DepthFrame> = usable.iter().skip(1).step_by(2).cloned().collect();
    let vol_a = fuse_depth(&a, grid)?;
    let vol_b = fuse_depth(&b, grid)?;
    static_triplets_from_pair(&vol_a, &vol_b, negatives, config, count, seed)
}

/// One object of a scan pair as seen by the dynamic sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicInstance {
    pub instance_id: u32,
    /// Region of the object in the source scan.
    pub segment: ObjectSegment,
    /// Source-to-rescan motion; `None` when the object is not in the re-scan.
    pub gt_pose: Option<RigidPose>,
    pub removed: bool,
}

/// Dynamic triplets: anchors on source objects, positives at the ground-truth
/// mapped location refined on the re-scan, negatives from other scenes and
/// from sites of removed objects.
pub fn sample_dynamic_triplets(
    source: &TsdfVolume,
    rescan: &TsdfVolume,
    instances: &[DynamicInstance],
    other_scenes: &[&TsdfVolume],
    config: &TripletConfig,
    count: usize,
    seed: u64,
) -> Result<TripletBatch> {
    config.validate()?;
    let mut out = TripletBatch::default();
    if count == 0 {
        return Ok(out);
    }
    let field_a = ResponseField::compute(source, &config.harris)?;
    let field_b = ResponseField::compute(rescan, &config.harris)?;
    let keypoints = stable_keypoints(&field_a, config)?;
    let mut pairs = Vec::new();
    let mut sites = Vec::new();
    for inst in instances {
        match (inst.gt_pose, inst.removed) {
            (Some(t), _) => {
                let mut kept = 0;
                for kp in inst.segment.select(&keypoints) {
                    let mapped = Keypoint { position: t.transform_point(&kp.position), response: kp.response };
                    if let Some(r) = field_b.refine(&mapped, config.pairing_radius, config.harris.pairing_fraction) {
                        pairs.push(Pairing { anchor: kp.position, positive: r.position });
                        kept += 1;
                    }
                }
                if kept == 0 {
                    out.diagnostics.push(format!("instance {}: no keypoint pairs", inst.instance_id));
                }
            }
            (None, true) => sites.push((rescan, inst.segment.center())),
            (None, false) => out
                .diagnostics
                .push(format!("instance {}: absent from re-scan and not marked removed, skipped", inst.instance_id)),
        }
    }
    let pool = NegativePool::new(other_scenes, config.harris.surface_band).with_sites(sites);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    emit(&mut pairs, source, rescan, &pool, config, count, Provenance::Dynamic, &mut rng, &mut out)?;
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    id: usize,
    provenance: Provenance,
    anchor: [String; 2],
    positive: [String; 2],
    negative: [String; 2],
}

#[derive(Serialize, Deserialize)]
struct StoreIndex {
    resolution: usize,
    fine_extent: f32,
    coarse_extent: f32,
    triplets: Vec<IndexEntry>,
}

fn patch_volume(p: &Patch) -> Result<TsdfVolume> {
    let r = p.resolution();
    let vs = p.extent() / r as f32;
    let o = -((r / 2) as f32) * vs;
    let grid = VolumeGrid::new([r; 3], vs, [o; 3], 1.0)?;
    TsdfVolume::new(grid, p.values().to_vec(), None)
}

/// Writes triplets as `RIOT` patch files plus an `index.json`.
pub fn save_triplets(dir: impl AsRef<Path>, triplets: &[TrainingTriplet]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let spec = triplets.first().map(|t| (t.anchor.fine.resolution(), t.anchor.fine.extent(), t.anchor.coarse.extent()));
    let (resolution, fine_extent, coarse_extent) = spec.unwrap_or((0, 0.0, 0.0));
    let mut entries = Vec::with_capacity(triplets.len());
    for (id, t) in triplets.iter().enumerate() {
        let mut names = Vec::with_capacity(6);
        for (role, pair) in [("anchor", &t.anchor), ("positive", &t.positive), ("negative", &t.negative)] {
            for (scale, patch) in [("fine", &pair.fine), ("coarse", &pair.coarse)] {
                let name = format!("{id:06}-{role}-{scale}.tsdf");
                save_volume(dir.join(&name), &patch_volume(patch)?)?;
                names.push(name);
            }
        }
        let mut it = names.into_iter();
        let mut two = || [it.next().unwrap_or_default(), it.next().unwrap_or_default()];
        entries.push(IndexEntry { id, provenance: t.provenance, anchor: two(), positive: two(), negative: two() });
    }
    let index = StoreIndex { resolution, fine_extent, coarse_extent, triplets: entries };
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("index.json"))?), &index)?;
    Ok(())
}

pub fn load_triplets(dir: impl AsRef<Path>) -> Result<Vec<TrainingTriplet>> {
    let dir = dir.as_ref();
    let index: StoreIndex = serde_json::from_reader(File::open(dir.join("index.json"))?)?;
    let load = |name: &str, extent: f32| -> Result<Patch> {
        let v = load_volume(dir.join(name))?;
        if v.dims() != [index.resolution; 3] {
            return Err(RioError::Format(format!("{name}: expected a {}³ patch", index.resolution)));
        }
        Patch::from_values(index.resolution, extent, true, v.into_parts().1)
    };
    let pair = |names: &[String; 2]| -> Result<PatchPair> {
        Ok(PatchPair { fine: load(&names[0], index.fine_extent)?, coarse: load(&names[1], index.coarse_extent)? })
    };
    index
        .triplets
        .iter()
        .map(|e| {
            Ok(TrainingTriplet {
                anchor: pair(&e.anchor)?,
                positive: pair(&e.positive)?,
                negative: pair(&e.negative)?,
                provenance: e.provenance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertical_augmentation_keeps_z_and_reaches_all_four_turns() {
        let cube = CubeRotation::all();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = Vec::new();
        for _ in 0..200 {
            let Some(Augmented::Cube(r)) = draw_rotation(&mut rng, Augmentation::Vertical, &cube) else {
                panic!("vertical augmentation must draw an exact cube rotation");
            };
            assert_eq!(r.matrix()[(2, 2)], 1.0);
            if !seen.contains(&r) {
                seen.push(r);
            }
        }
        assert_eq!(seen.len(), 4);
    }
}
