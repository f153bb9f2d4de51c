use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{TsdfVolume, VolumeGrid};
use crate::error::{invalid, Result};
use crate::pose::RigidPose;

/// Pinhole intrinsics. Pixel `(c, r)` has its center at `(c, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Direction of the ray through a pixel center, with unit z component.
    pub fn ray(&self, col: f64, row: f64) -> Vector3<f64> {
        Vector3::new((col - self.cx) / self.fx, (row - self.cy) / self.fy, 1.0)
    }
}

/// A depth image with calibration and camera-to-world pose. Depth is the z
/// coordinate in the camera frame, in meters; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
    pub intrinsics: CameraIntrinsics,
    pub camera_pose: RigidPose,
}

impl DepthFrame {
    pub fn validate(&self) -> Result<()> {
        if self.depth.len() != self.width * self.height {
            return invalid(format!("depth buffer has {} pixels, expected {}×{}", self.depth.len(), self.width, self.height));
        }
        if self.depth.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return invalid("depth values must be finite and non-negative");
        }
        let k = &self.intrinsics;
        if ![k.fx, k.fy, k.cx, k.cy].iter().all(|v| v.is_finite()) || k.fx <= 0.0 || k.fy <= 0.0 {
            return invalid("intrinsics must be finite with positive focal lengths");
        }
        self.camera_pose.validate()
    }
}

// Per-sample TSDF contributions are quantized to this many steps per unit so
// the running sums are exact integers and fusion is independent of frame order.
const QUANT: f64 = (1u64 << 24) as f64;

/// Integrates depth frames into a TSDF volume using projective distances and
/// a uniform weight of 1 per observation.
///
/// A voxel is updated by a frame when it projects onto a valid pixel and lies
/// no more than `truncation` behind the measured surface. Voxels that no frame
/// updates stay at `+1` with weight 0.
pub fn fuse_depth(frames: &[DepthFrame], grid: &VolumeGrid) -> Result<TsdfVolume> {
    if frames.is_empty() {
        return invalid("fuse_depth needs at least one frame");
    }
    grid.validate()?;
    if grid.truncation < 2.0 * grid.voxel_size {
        return invalid(format!(
            "truncation {} must be at least twice the voxel size {}",
            grid.truncation, grid.voxel_size
        ));
    }
    for (i, f) in frames.iter().enumerate() {
        f.validate().map_err(|e| crate::error::RioError::InvalidArgument(format!("frame {i}: {e}")))?;
    }
    let world_to_cam: Vec<RigidPose> = frames.iter().map(|f| f.camera_pose.inverse()).collect();
    let trunc = grid.truncation as f64;
    let n = grid.len();
    let mut sums = vec![0i64; n];
    let mut counts = vec![0u32; n];

    for (frame, w2c) in frames.iter().zip(&world_to_cam) {
        for idx in 0..n {
            let [x, y, z] = grid.coords(idx);
            let pc = w2c.transform_point(&grid.voxel_center(x, y, z));
            let Some((u, v)) = frame.intrinsics.project(&pc) else { continue };
            let (col, row) = (u.round(), v.round());
            if col < 0.0 || row < 0.0 || col >= frame.width as f64 || row >= frame.height as f64 {
                continue;
            }
            let d = frame.depth[row as usize * frame.width + col as usize] as f64;
            if d <= 0.0 {
                continue;
            }
            let sdf = d - pc.z;
            if sdf < -trunc {
                continue;
            }
            let tsdf = (sdf / trunc).min(1.0);
            sums[idx] += (tsdf * QUANT).round() as i64;
            counts[idx] += 1;
        }
    }

    let mut values = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (s, c) in sums.iter().zip(&counts) {
        if *c == 0 {
            values.push(1.0);
            weights.push(0.0);
        } else {
            values.push(((*s as f64 / QUANT) / *c as f64).clamp(-1.0, 1.0) as f32);
            weights.push(*c as f32);
        }
    }
    TsdfVolume::new(*grid, values, Some(weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Camera at the origin looking down +z at a wall at z = 1.
    fn plane_frame() -> DepthFrame {
        let (w, h) = (21, 21);
        DepthFrame {
            width: w,
            height: h,
            depth: vec![1.0; w * h],
            intrinsics: CameraIntrinsics { fx: 20.0, fy: 20.0, cx: 10.0, cy: 10.0 },
            camera_pose: RigidPose::identity(),
        }
    }

    #[test]
    fn surface_voxel_is_zero_and_occluded_is_unobserved() {
        // dyadic sizes keep voxel centers exact
        let grid = VolumeGrid::new([1, 1, 33], 0.03125, [0.0, 0.0, 0.5], 0.125).unwrap();
        let vol = fuse_depth(&[plane_frame()], &grid).unwrap();
        // voxel z index 16 is at z = 1.0
        assert_eq!(grid.voxel_center(0, 0, 16).z, 1.0);
        assert_eq!(vol.at(0, 0, 16), 0.0);
        assert_eq!(vol.weights().unwrap()[16], 1.0);
        // z = 1.25 is two truncations behind the wall
        let behind = grid.index(0, 0, 24);
        assert_eq!(grid.voxel_center(0, 0, 24).z, 1.25);
        assert_eq!(vol.values()[behind], 1.0);
        assert_eq!(vol.weights().unwrap()[behind], 0.0);
        // free space in front is observed as +1
        assert_eq!(vol.at(0, 0, 0), 1.0);
        assert_eq!(vol.weights().unwrap()[0], 1.0);
    }

    #[test]
    fn errors() {
        let grid = VolumeGrid::new([2, 2, 2], 0.05, [0.0; 3], 0.2).unwrap();
        assert!(fuse_depth(&[], &grid).is_err());
        let bad = VolumeGrid { voxel_size: 0.0, ..grid };
        assert!(fuse_depth(&[plane_frame()], &bad).is_err());
        let thin = VolumeGrid { truncation: 0.05, ..grid };
        assert!(fuse_depth(&[plane_frame()], &thin).is_err());
    }
}
