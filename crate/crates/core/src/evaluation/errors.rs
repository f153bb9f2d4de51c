use nalgebra::{Matrix3, Vector3};

use super::{SymmetryClass, SymmetryKind};
use crate::error::Result;
use crate::pose::{axis_angle_matrix, check_rotation, rotation_angle};

/// Rotation error in degrees: the axis-angle magnitude of `R_pᵀ R_gt`,
/// minimized over the symmetric rotations of the ground truth.
///
/// For `Cn` the ground truth is right-multiplied by each rotation `2πk/n`
/// about the canonical axis; for `C∞` only the image of the axis is compared.
pub fn rotation_error(r_pred: &Matrix3<f64>, r_gt: &Matrix3<f64>, symmetry: &SymmetryClass) -> Result<f64> {
    check_rotation(r_pred)?;
    check_rotation(r_gt)?;
    let axis = symmetry.axis.normalize();
    let rad = match symmetry.kind.order() {
        Some(n) => (0..n)
            .map(|k| {
                let sym = axis_angle_matrix(axis, std::f64::consts::TAU * k as f64 / n as f64);
                rotation_angle(&(r_pred.transpose() * r_gt * sym))
            })
            .fold(f64::INFINITY, f64::min),
        None => angle_between(&(r_pred * axis), &(r_gt * axis)),
    };
    debug_assert!(symmetry.kind != SymmetryKind::CInf || rad <= std::f64::consts::PI);
    Ok(rad.to_degrees())
}

/// Euclidean norm of `t_p − t_gt`, in meters.
pub fn translation_error(t_pred: &Vector3<f64>, t_gt: &Vector3<f64>) -> f64 {
    (t_pred - t_gt).norm()
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}
