use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::Keypoint;
use crate::error::{invalid, Result};
use crate::pose::RigidPose;

/// Region of a scan occupied by one object: an oriented box in world
/// coordinates, grown by `margin` when testing membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSegment {
    /// Box frame to world.
    pub pose: RigidPose,
    #[serde(with = "vec_serde")]
    pub half_extents: Vector3<f64>,
    pub margin: f64,
}

mod vec_serde {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        Ok(Vector3::from(<[f64; 3]>::deserialize(d)?))
    }
}

impl ObjectSegment {
    pub fn new(pose: RigidPose, half_extents: Vector3<f64>, margin: f64) -> Result<Self> {
        let s = ObjectSegment { pose, half_extents, margin };
        s.validate()?;
        Ok(s)
    }

    pub fn axis_aligned(center: Point3<f64>, half_extents: Vector3<f64>, margin: f64) -> Result<Self> {
        Self::new(RigidPose::new(Matrix3::identity(), center.coords), half_extents, margin)
    }

    pub fn validate(&self) -> Result<()> {
        self.pose.validate()?;
        if !self.half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return invalid(format!("segment half extents must be positive, got {:?}", self.half_extents));
        }
        if !(self.margin >= 0.0) {
            return invalid("segment margin must be non-negative");
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let local = self.pose.inverse().transform_point(p);
        (0..3).all(|a| local[a].abs() <= self.half_extents[a] + self.margin)
    }

    /// The same region after the object moved by `motion` (world frame).
    pub fn transformed(&self, motion: &RigidPose) -> ObjectSegment {
        ObjectSegment { pose: motion.compose(&self.pose), ..*self }
    }

    pub fn select(&self, keypoints: &[Keypoint]) -> Vec<Keypoint> {
        keypoints.iter().filter(|k| self.contains(&k.position)).copied().collect()
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.pose.translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rotated_box_membership() {
        let pose = RigidPose::from_axis_angle(Vector3::z(), FRAC_PI_2);
        let s = ObjectSegment::new(pose, Vector3::new(1.0, 0.1, 0.1), 0.0).unwrap();
        assert!(s.contains(&Point3::new(0.0, 0.9, 0.0)));
        assert!(!s.contains(&Point3::new(0.9, 0.0, 0.0)));
        let moved = s.transformed(&RigidPose::from_translation(Vector3::new(5.0, 0.0, 0.0)));
        assert!(moved.contains(&Point3::new(5.0, 0.9, 0.0)));
    }
}
