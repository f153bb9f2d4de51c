//! Rigid transforms in 3D.

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Frobenius tolerance on `RᵀR − I` for a matrix to count as a rotation.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// A proper rigid motion `x ↦ R x + t`.
///
/// Serialized as `{"rotation": [9 floats, row-major], "translation": [x, y, z]}`.
/// Deserialization does not validate; call [`RigidPose::validate`] where the
/// input is untrusted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl From<PoseRepr> for RigidPose {
    fn from(r: PoseRepr) -> Self {
        RigidPose {
            rotation: Matrix3::from_row_slice(&r.rotation),
            translation: Vector3::from(r.translation),
        }
    }
}

impl From<RigidPose> for PoseRepr {
    fn from(p: RigidPose) -> Self {
        PoseRepr { rotation: p.rotation_row_major(), translation: p.translation.into() }
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidPose { rotation, translation }
    }

    pub fn identity() -> Self {
        RigidPose { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        RigidPose { rotation: Matrix3::identity(), translation: t }
    }

    pub fn from_rotation(r: Matrix3<f64>) -> Self {
        RigidPose { rotation: r, translation: Vector3::zeros() }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        Self::from_rotation(axis_angle_matrix(axis, angle))
    }

    /// Rotation of `angle` radians about the line through `center` along `axis`.
    pub fn rotation_about(center: Point3<f64>, axis: Vector3<f64>, angle: f64) -> Self {
        let r = axis_angle_matrix(axis, angle);
        RigidPose { rotation: r, translation: center.coords - r * center.coords }
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]]
    }

    pub fn from_row_major(rotation: [f64; 9], translation: [f64; 3]) -> Self {
        PoseRepr { rotation, translation }.into()
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation.transpose();
        RigidPose { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.rotation)
    }

    pub fn is_valid(&self) -> bool {
        is_rotation(&self.rotation) && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.translation.iter().all(|v| v.is_finite()) {
            return invalid("pose translation is not finite");
        }
        check_rotation(&self.rotation)
    }
}

pub fn axis_angle_matrix(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Matrix3::identity();
    }
    *Rotation3::from_axis_angle(&Unit::new_unchecked(axis / n), angle).matrix()
}

pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

pub fn is_rotation(r: &Matrix3<f64>) -> bool {
    r.iter().all(|v| v.is_finite()) && orthonormality_error(r) < ORTHONORMAL_TOL && r.determinant() > 0.0
}

pub fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return invalid("rotation has non-finite entries");
    }
    let err = orthonormality_error(r);
    if err >= ORTHONORMAL_TOL {
        return invalid(format!("rotation is not orthonormal (|RᵀR − I|_F = {err:.3e})"));
    }
    if r.determinant() <= 0.0 {
        return invalid(format!("rotation has det = {:.6} (reflection)", r.determinant()));
    }
    Ok(())
}

/// Geodesic angle of a rotation matrix, in radians, via `atan2` for accuracy near 0.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    v.norm().atan2(r.trace() - 1.0)
}
