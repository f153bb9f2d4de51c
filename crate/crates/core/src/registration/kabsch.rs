use nalgebra::{Matrix3, Point3, Vector3, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RioError};
use crate::pose::RigidPose;

/// A putative point pair between the source object and the target scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    #[serde(with = "crate::keypoints::point_serde")]
    pub source_point: Point3<f64>,
    #[serde(with = "crate::keypoints::point_serde")]
    pub target_point: Point3<f64>,
    pub descriptor_distance: f64,
}

impl Correspondence {
    pub fn new(source_point: Point3<f64>, target_point: Point3<f64>) -> Self {
        Correspondence { source_point, target_point, descriptor_distance: 0.0 }
    }

    pub fn residual(&self, pose: &RigidPose) -> f64 {
        (pose.transform_point(&self.source_point) - self.target_point).norm()
    }
}

/// Relative singular-value floor below which a point set counts as collinear.
const RANK_TOL: f64 = 1e-10;

/// Least-squares rigid alignment of paired points (Kabsch/SVD).
///
/// Returns the proper rotation and translation minimizing
/// `Σ |R p_i + t − q_i|²`; reflections are ruled out by the determinant
/// correction `R = V·diag(1, 1, det(V Uᵀ))·Uᵀ`.
pub fn kabsch(correspondences: &[Correspondence]) -> Result<RigidPose> {
    let n = correspondences.len();
    if n < 3 {
        return Err(RioError::DegenerateInput(format!("kabsch needs at least 3 correspondences, got {n}")));
    }
    let inv_n = 1.0 / n as f64;
    let src_c = correspondences.iter().fold(Vector3::zeros(), |a, c| a + c.source_point.coords) * inv_n;
    let dst_c = correspondences.iter().fold(Vector3::zeros(), |a, c| a + c.target_point.coords) * inv_n;

    let mut h = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    for c in correspondences {
        let p = c.source_point.coords - src_c;
        let q = c.target_point.coords - dst_c;
        h += p * q.transpose();
        src_cov += p * p.transpose();
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(RioError::DegenerateInput("non-finite correspondence coordinates".into()));
    }
    if is_rank_deficient(&src_cov) || is_rank_deficient(&h) {
        return Err(RioError::DegenerateInput("points are collinear (rank-deficient covariance)".into()));
    }

    let svd = SVD::new(h, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();
    let translation = dst_c - rotation * src_c;
    Ok(RigidPose { rotation, translation })
}

/// Second-largest singular value negligible relative to the largest.
fn is_rank_deficient(m: &Matrix3<f64>) -> bool {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] <= f64::MIN_POSITIVE || s[1] <= RANK_TOL * s[0]
}

/// Sum of squared residuals of a pose over the correspondences.
pub fn sum_squared_residuals(pose: &RigidPose, correspondences: &[Correspondence]) -> f64 {
    correspondences.iter().map(|c| c.residual(pose).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::axis_angle_matrix;

    fn pts() -> Vec<Point3<f64>> {
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
            Point3::new(0.3, 0.4, 1.5),
            Point3::new(-0.7, 0.2, 0.9),
        ]
    }

    #[test]
    fn identity_for_equal_sets() {
        let c: Vec<_> = pts().into_iter().map(|p| Correspondence::new(p, p)).collect();
        let pose = kabsch(&c).unwrap();
        assert!((pose.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(pose.translation.norm() < 1e-12);
        assert!(sum_squared_residuals(&pose, &c) < 1e-20);
    }

    #[test]
    fn recovers_rz90_plus_translation() {
        let truth = RigidPose::new(axis_angle_matrix(Vector3::z(), std::f64::consts::FRAC_PI_2), Vector3::new(1.0, 2.0, 3.0));
        let c: Vec<_> = pts().into_iter().map(|p| Correspondence::new(p, truth.transform_point(&p))).collect();
        let pose = kabsch(&c).unwrap();
        assert!(sum_squared_residuals(&pose, &c).sqrt() < 1e-10);
        assert!((pose.rotation - truth.rotation).norm() < 1e-12);
        assert!(pose.is_valid());
    }

    #[test]
    fn degenerate_inputs() {
        let c: Vec<_> = pts().into_iter().take(2).map(|p| Correspondence::new(p, p)).collect();
        assert!(matches!(kabsch(&c), Err(RioError::DegenerateInput(_))));
        let line: Vec<_> = (0..5)
            .map(|i| {
                let p = Point3::new(i as f64, 2.0 * i as f64, 0.5);
                Correspondence::new(p, p)
            })
            .collect();
        assert!(matches!(kabsch(&line), Err(RioError::DegenerateInput(_))));
    }

    #[test]
    fn planar_three_points_are_fine() {
        let p = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let truth = RigidPose::new(axis_angle_matrix(Vector3::new(1.0, 1.0, 1.0), 2.5), Vector3::new(-1.0, 0.5, 0.0));
        let c: Vec<_> = p.iter().map(|p| Correspondence::new(*p, truth.transform_point(p))).collect();
        let pose = kabsch(&c).unwrap();
        assert!((pose.rotation - truth.rotation).norm() < 1e-10);
    }
}
