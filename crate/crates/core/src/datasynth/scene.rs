use nalgebra::{Matrix3, Point3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, RioError};
use crate::evaluation::{SymmetryClass, SymmetryKind};
use crate::keypoints::ObjectSegment;
use crate::pose::RigidPose;
use crate::volume::{CubeRotation, SignedDistance, VolumeGrid};

/// Shape of an object in its own frame, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    /// Axis along local z.
    Cylinder { radius: f64, half_height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Box,
    Sphere,
    Cylinder,
}

impl Primitive {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Primitive::Box { .. } => PrimitiveKind::Box,
            Primitive::Sphere { .. } => PrimitiveKind::Sphere,
            Primitive::Cylinder { .. } => PrimitiveKind::Cylinder,
        }
    }

    pub fn local_distance(&self, p: &Point3<f64>) -> f64 {
        match *self {
            Primitive::Box { half_extents: h } => {
                let q = Vector3::new(p.x.abs() - h[0], p.y.abs() - h[1], p.z.abs() - h[2]);
                q.map(|v| v.max(0.0)).norm() + q.max().min(0.0)
            }
            Primitive::Sphere { radius } => p.coords.norm() - radius,
            Primitive::Cylinder { radius, half_height } => {
                let d = Vector2::new(Vector2::new(p.x, p.y).norm() - radius, p.z.abs() - half_height);
                d.x.max(d.y).min(0.0) + d.map(|v| v.max(0.0)).norm()
            }
        }
    }

    /// Half extents of the local bounding box.
    pub fn half_extents(&self) -> Vector3<f64> {
        match *self {
            Primitive::Box { half_extents: h } => Vector3::from(h),
            Primitive::Sphere { radius } => Vector3::repeat(radius),
            Primitive::Cylinder { radius, half_height } => Vector3::new(radius, radius, half_height),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => radius,
            Primitive::Cylinder { radius, half_height } => radius.hypot(half_height),
            Primitive::Box { .. } => self.half_extents().norm(),
        }
    }

    /// Distance from the center down to the lowest point when the object is
    /// rotated by `r`.
    pub fn support_height(&self, r: &Matrix3<f64>) -> f64 {
        let row = r.row(2);
        match *self {
            Primitive::Box { half_extents: h } => (0..3).map(|i| row[i].abs() * h[i]).sum(),
            Primitive::Sphere { radius } => radius,
            Primitive::Cylinder { radius, half_height } => radius * row[0].hypot(row[1]) + half_height * row[2].abs(),
        }
    }

    /// Symmetry class in the object frame.
    pub fn symmetry(&self) -> SymmetryClass {
        match self {
            Primitive::Box { .. } => SymmetryClass::none(),
            Primitive::Sphere { .. } | Primitive::Cylinder { .. } => {
                SymmetryClass { kind: SymmetryKind::CInf, axis: Vector3::z() }
            }
        }
    }

    /// Proper rotations of the object frame that leave the shape unchanged,
    /// beyond what [`Primitive::symmetry`] already covers. Identity first.
    pub fn discrete_symmetries(&self) -> Vec<Matrix3<f64>> {
        match *self {
            Primitive::Box { half_extents: h } => CubeRotation::all()
                .into_iter()
                .map(|c| c.matrix())
                .filter(|m| {
                    let mapped = m.abs() * Vector3::from(h);
                    (mapped - Vector3::from(h)).norm() <= 1e-9 * Vector3::from(h).norm()
                })
                .collect(),
            // upside-down flip; rotation about the axis is continuous
            Primitive::Sphere { .. } | Primitive::Cylinder { .. } => {
                vec![Matrix3::identity(), Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))]
            }
        }
    }

    pub fn same_shape(&self, other: &Primitive) -> bool {
        self == other
    }
}

/// One placed object. `pose` maps the object frame to world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub class_label: String,
    pub primitive: Primitive,
    pub pose: RigidPose,
    /// Symmetry with the axis in world coordinates.
    pub symmetry: SymmetryClass,
}

impl SceneObject {
    pub fn new(id: u32, class_label: String, primitive: Primitive, pose: RigidPose) -> Self {
        let local = primitive.symmetry();
        let symmetry = SymmetryClass { kind: local.kind, axis: pose.rotation * local.axis };
        SceneObject { id, class_label, primitive, pose, symmetry }
    }

    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let local = self.pose.inverse().transform_point(p);
        self.primitive.local_distance(&local)
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.pose.translation)
    }

    /// Oriented bounding box grown by `margin`.
    pub fn segment(&self, margin: f64) -> ObjectSegment {
        ObjectSegment { pose: self.pose, half_extents: self.primitive.half_extents(), margin }
    }

    /// The object after a world-frame rigid motion.
    pub fn moved(&self, motion: &RigidPose) -> SceneObject {
        SceneObject::new(self.id, self.class_label.clone(), self.primitive, motion.compose(&self.pose))
    }
}

/// Floor at `z = 0` and four walls around `[-hx, hx] × [-hy, hy]`, open at
/// the top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub half_x: f64,
    pub half_y: f64,
    /// Height of the walls; also the top of the scanned volume.
    pub height: f64,
}

impl Room {
    /// Signed distance to the room shell, positive in the free interior.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let q = Vector3::new(p.x.abs() - self.half_x, p.y.abs() - self.half_y, -p.z);
        // interior is where all of q < 0; the shell is its complement
        let inside = -q.max();
        if inside >= 0.0 {
            inside
        } else {
            -q.map(|v| v.max(0.0)).norm()
        }
    }

    pub fn contains_xy(&self, c: &Point3<f64>, radius: f64) -> bool {
        c.x.abs() + radius <= self.half_x && c.y.abs() + radius <= self.half_y
    }

    /// Grid covering the room with `margin` of wall/floor thickness.
    pub fn grid(&self, voxel_size: f32, truncation: f32, margin: f64) -> Result<VolumeGrid> {
        VolumeGrid::covering(
            Point3::new(-self.half_x - margin, -self.half_y - margin, -margin),
            Point3::new(self.half_x + margin, self.half_y + margin, self.height),
            voxel_size,
            truncation,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub room: Option<Room>,
    pub objects: Vec<SceneObject>,
    pub seed: u64,
}

impl SignedDistance for SyntheticScene {
    fn distance(&self, p: &Point3<f64>) -> f64 {
        let mut d = self.room.map_or(f64::INFINITY, |r| r.distance(p));
        for o in &self.objects {
            d = d.min(o.distance(p));
        }
        d
    }

    fn is_empty(&self) -> bool {
        self.room.is_none() && self.objects.is_empty()
    }
}

impl SyntheticScene {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn next_id(&self) -> u32 {
        self.objects.iter().map(|o| o.id + 1).max().unwrap_or(0)
    }
}

/// Parameters of [`generate_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub room: Room,
    pub objects: usize,
    pub kinds: Vec<PrimitiveKind>,
    /// Range of box half extents and of sphere/cylinder radii, meters.
    pub size_range: [f64; 2],
    /// Chance that a new object copies the shape of an earlier one.
    pub duplicate_probability: f64,
    /// Minimum free space between bounding circles and to the walls.
    pub clearance: f64,
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            room: Room { half_x: 1.5, half_y: 1.5, height: 1.2 },
            objects: 6,
            kinds: vec![PrimitiveKind::Box],
            size_range: [0.1, 0.3],
            duplicate_probability: 0.2,
            clearance: 0.05,
            max_attempts: 2000,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.size_range;
        if !(lo > 0.0 && hi >= lo) {
            return invalid(format!("size range must satisfy 0 < min ≤ max, got {:?}", self.size_range));
        }
        if self.objects > 0 && self.kinds.is_empty() {
            return invalid("at least one primitive kind is required");
        }
        if !(self.room.half_x > 0.0 && self.room.half_y > 0.0 && self.room.height > 0.0) {
            return invalid("room dimensions must be positive");
        }
        if !(0.0..=1.0).contains(&self.duplicate_probability) || !(self.clearance >= 0.0) {
            return invalid("duplicate_probability must lie in [0, 1] and clearance must be non-negative");
        }
        Ok(())
    }
}

/// Label following the naming the class map understands.
pub fn class_label_for(p: &Primitive) -> &'static str {
    match *p {
        Primitive::Box { half_extents: h } => {
            let m = h.iter().cloned().fold(0.0, f64::max);
            if m >= 0.25 {
                "cabinet"
            } else if h[2] >= 0.18 {
                "nightstand"
            } else {
                "box"
            }
        }
        Primitive::Sphere { .. } => "ball",
        Primitive::Cylinder { .. } => "trash bin",
    }
}

pub(crate) fn random_primitive(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> Primitive {
    let [lo, hi] = cfg.size_range;
    let kind = cfg.kinds[rng.random_range(0..cfg.kinds.len())];
    let mut s = || if hi > lo { rng.random_range(lo..=hi) } else { lo };
    match kind {
        PrimitiveKind::Box => Primitive::Box { half_extents: [s(), s(), s()] },
        PrimitiveKind::Sphere => Primitive::Sphere { radius: s() },
        PrimitiveKind::Cylinder => Primitive::Cylinder { radius: s(), half_height: s() },
    }
}

/// Places `rotation`-oriented `primitive` on the floor at a random free spot.
pub(crate) fn place(
    rng: &mut ChaCha8Rng,
    room: &Room,
    others: &[SceneObject],
    primitive: &Primitive,
    rotation: Matrix3<f64>,
    clearance: f64,
    mut center_xy: impl FnMut(&mut ChaCha8Rng) -> (f64, f64),
    attempts: usize,
) -> Option<RigidPose> {
    let r = primitive.bounding_radius();
    let z = primitive.support_height(&rotation);
    for _ in 0..attempts {
        let (x, y) = center_xy(rng);
        let c = Point3::new(x, y, z);
        if !room.contains_xy(&c, r + clearance) {
            continue;
        }
        let free = others.iter().all(|o| {
            let oc = o.center();
            Vector2::new(oc.x - c.x, oc.y - c.y).norm() >= r + o.primitive.bounding_radius() + clearance
        });
        if free {
            return Some(RigidPose::new(rotation, c.coords));
        }
    }
    None
}

fn yaw(angle: f64) -> Matrix3<f64> {
    crate::pose::axis_angle_matrix(Vector3::z(), angle)
}

/// Random room with `config.objects` primitives resting on the floor, each
/// with a random yaw and no two bounding circles closer than the clearance.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<SyntheticScene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = config.room;
    let mut objects: Vec<SceneObject> = Vec::with_capacity(config.objects);
    for id in 0..config.objects as u32 {
        let primitive = if !objects.is_empty() && rng.random_bool(config.duplicate_probability) {
            objects[rng.random_range(0..objects.len())].primitive
        } else {
            random_primitive(&mut rng, config)
        };
        let rot = yaw(rng.random_range(0.0..std::f64::consts::TAU));
        let (hx, hy) = (room.half_x, room.half_y);
        let pose = place(
            &mut rng,
            &room,
            &objects,
            &primitive,
            rot,
            config.clearance,
            |r| (r.random_range(-hx..hx), r.random_range(-hy..hy)),
            config.max_attempts,
        )
        .ok_or_else(|| {
            RioError::Generation(format!(
                "could not place object {id} ({:?}) after {} attempts; {} objects placed in a {:.2}×{:.2} m room",
                primitive.kind(),
                config.max_attempts,
                objects.len(),
                2.0 * hx,
                2.0 * hy
            ))
        })?;
        objects.push(SceneObject::new(id, class_label_for(&primitive).into(), primitive, pose));
    }
    Ok(SyntheticScene { room: Some(room), objects, seed })
}
