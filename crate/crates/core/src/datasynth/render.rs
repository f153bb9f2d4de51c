use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{invalid, Result};
use crate::pose::RigidPose;
use crate::volume::{CameraIntrinsics, DepthFrame, SignedDistance};

/// Camera-to-world pose at `eye` looking at `target`, with image y pointing
/// down and world z up.
pub fn look_at(eye: Point3<f64>, target: Point3<f64>) -> Result<RigidPose> {
    let z = target - eye;
    if z.norm() < 1e-9 {
        return invalid("look_at: eye and target coincide");
    }
    let z = z.normalize();
    let x = z.cross(&Vector3::z());
    if x.norm() < 1e-9 {
        return invalid("look_at: viewing direction is vertical");
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Ok(RigidPose::new(Matrix3::from_columns(&[x, y, z]), eye.coords))
}

/// `n` cameras on a horizontal circle of `radius` at `height`, all looking
/// at `target`.
pub fn orbit_poses(target: Point3<f64>, radius: f64, height: f64, n: usize) -> Result<Vec<RigidPose>> {
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            look_at(Point3::new(target.x + radius * a.cos(), target.y + radius * a.sin(), height), target)
        })
        .collect()
}

/// Sphere-traced depth image of a signed distance field. Pixels whose ray
/// finds no surface within `max_depth` read 0.
pub fn render_depth<S: SignedDistance + ?Sized>(
    scene: &S,
    intrinsics: CameraIntrinsics,
    camera_pose: RigidPose,
    width: usize,
    height: usize,
    max_depth: f64,
) -> DepthFrame {
    let mut depth = vec![0f32; width * height];
    for row in 0..height {
        for col in 0..width {
            let ray = intrinsics.ray(col as f64, row as f64);
            let len = ray.norm();
            let dir = camera_pose.rotation * (ray / len);
            let origin = Point3::from(camera_pose.translation);
            let mut t = 0.0;
            for _ in 0..256 {
                let d = scene.distance(&(origin + dir * t));
                if d.abs() < 1e-5 {
                    // ray length to camera-frame depth
                    let z = t / len;
                    if z <= max_depth {
                        depth[row * width + col] = z as f32;
                    }
                    break;
                }
                t += d.max(1e-5);
                if t / len > max_depth {
                    break;
                }
            }
        }
    }
    DepthFrame { width, height, depth, intrinsics, camera_pose }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Sphere(f64);

    impl SignedDistance for Sphere {
        fn distance(&self, p: &Point3<f64>) -> f64 {
            p.coords.norm() - self.0
        }
    }

    #[test]
    fn center_pixel_hits_front_of_sphere() {
        let pose = look_at(Point3::new(2.0, 0.0, 0.0), Point3::origin()).unwrap();
        let k = CameraIntrinsics { fx: 10.0, fy: 10.0, cx: 5.0, cy: 5.0 };
        let f = render_depth(&Sphere(0.5), k, pose, 11, 11, 10.0);
        assert!((f.depth[5 * 11 + 5] - 1.5).abs() < 1e-4);
        assert_eq!(f.depth[0], 0.0);
    }

    #[test]
    fn look_at_frame() {
        let p = look_at(Point3::new(1.0, 0.0, 0.0), Point3::origin()).unwrap();
        assert!(p.is_valid());
        assert!((p.rotation.column(2) - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        // image y points down
        assert!(p.rotation.column(1).z < 0.0);
    }
}
