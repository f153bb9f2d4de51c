//! Truncated signed distance volumes.
//!
//! Values are stored normalized by the truncation distance, so every voxel
//! lies in `[-1, 1]`. Voxels that were never observed hold `+1` (empty space)
//! with weight 0.

mod analytic;
mod fusion;
pub mod io;
mod patch;

pub use analytic::{analytic_tsdf, SignedDistance};
pub use fusion::{fuse_depth, CameraIntrinsics, DepthFrame};
pub use patch::{extract_patch, extract_two_scale, invert_tsdf, CubeRotation, Patch, PatchPair, PatchPairSpec};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default truncation band, in meters.
pub const DEFAULT_TRUNCATION: f32 = 0.15;

/// Geometry of a regular voxel grid. `origin` is the center of voxel `(0,0,0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrid {
    pub dims: [usize; 3],
    pub voxel_size: f32,
    pub origin: [f32; 3],
    pub truncation: f32,
}

impl VolumeGrid {
    pub fn new(dims: [usize; 3], voxel_size: f32, origin: [f32; 3], truncation: f32) -> Result<Self> {
        let grid = VolumeGrid { dims, voxel_size, origin, truncation };
        grid.validate()?;
        Ok(grid)
    }

    /// Smallest grid with the given voxel size covering `[lo, hi]`.
    pub fn covering(lo: Point3<f64>, hi: Point3<f64>, voxel_size: f32, truncation: f32) -> Result<Self> {
        let vs = voxel_size as f64;
        let mut dims = [0usize; 3];
        for a in 0..3 {
            dims[a] = (((hi[a] - lo[a]) / vs).ceil() as usize + 1).max(1);
        }
        let origin = [lo.x as f32, lo.y as f32, lo.z as f32];
        Self::new(dims, voxel_size, origin, truncation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return invalid(format!("grid dims must be positive, got {:?}", self.dims));
        }
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return invalid(format!("voxel_size must be positive, got {}", self.voxel_size));
        }
        if !(self.truncation > 0.0) || !self.truncation.is_finite() {
            return invalid(format!("truncation must be positive, got {}", self.truncation));
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return invalid("grid origin must be finite");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index, x fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let yz = idx / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    /// World position of a voxel center.
    #[inline]
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Point3<f64> {
        let vs = self.voxel_size as f64;
        Point3::new(
            self.origin[0] as f64 + vs * x as f64,
            self.origin[1] as f64 + vs * y as f64,
            self.origin[2] as f64 + vs * z as f64,
        )
    }

    /// Continuous voxel coordinates of a world point.
    #[inline]
    pub fn to_grid(&self, p: &Point3<f64>) -> [f64; 3] {
        let vs = self.voxel_size as f64;
        [
            (p.x - self.origin[0] as f64) / vs,
            (p.y - self.origin[1] as f64) / vs,
            (p.z - self.origin[2] as f64) / vs,
        ]
    }

    /// World-space bounds spanned by the voxel centers.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        (self.voxel_center(0, 0, 0), self.voxel_center(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1))
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let (lo, hi) = self.bounds();
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }
}

/// A dense TSDF volume. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    grid: VolumeGrid,
    values: Vec<f32>,
    weights: Option<Vec<f32>>,
}

impl TsdfVolume {
    pub fn new(grid: VolumeGrid, values: Vec<f32>, weights: Option<Vec<f32>>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return invalid(format!("expected {} values, got {}", grid.len(), values.len()));
        }
        if let Some(bad) = values.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            return invalid(format!("value {} at index {bad} outside [-1, 1]", values[bad]));
        }
        if let Some(w) = &weights {
            if w.len() != grid.len() {
                return invalid(format!("expected {} weights, got {}", grid.len(), w.len()));
            }
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return invalid("weights must be finite and non-negative");
            }
        }
        Ok(TsdfVolume { grid, values, weights })
    }

    /// A volume with every voxel unobserved (`+1`).
    pub fn empty(grid: VolumeGrid) -> Result<Self> {
        grid.validate()?;
        Ok(TsdfVolume { values: vec![1.0; grid.len()], grid, weights: None })
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn voxel_size(&self) -> f32 {
        self.grid.voxel_size
    }

    pub fn truncation(&self) -> f32 {
        self.grid.truncation
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn weights(&self) -> Option<&[f32]> {
        self.weights.as_deref()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.values[self.grid.index(x, y, z)]
    }

    /// Voxel lookup that treats everything outside the grid as empty space.
    #[inline]
    pub fn at_or_empty(&self, x: isize, y: isize, z: isize) -> f32 {
        let d = self.grid.dims;
        if x < 0 || y < 0 || z < 0 || x as usize >= d[0] || y as usize >= d[1] || z as usize >= d[2] {
            1.0
        } else {
            self.at(x as usize, y as usize, z as usize)
        }
    }

    /// Trilinear interpolation at a world point; `+1` outside the grid.
    pub fn sample(&self, p: &Point3<f64>) -> f32 {
        let g = self.grid.to_grid(p);
        if g.iter().any(|v| !v.is_finite()) {
            return 1.0;
        }
        let d = self.grid.dims;
        if (0..3).any(|a| g[a] < -1.0 || g[a] > d[a] as f64) {
            return 1.0;
        }
        let mut base = [0isize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let r = g[a].round();
            // snap samples that sit on a voxel center up to rounding noise
            let v = if (g[a] - r).abs() < 1e-6 { r } else { g[a] };
            let f = v.floor();
            base[a] = f as isize;
            frac[a] = v - f;
        }
        let mut acc = 0.0f64;
        for dz in 0..2 {
            let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
            if wz == 0.0 {
                continue;
            }
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
                if wy == 0.0 {
                    continue;
                }
                for dx in 0..2 {
                    let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
                    if wx == 0.0 {
                        continue;
                    }
                    let v = self.at_or_empty(base[0] + dx, base[1] + dy, base[2] + dz) as f64;
                    acc += wx * wy * wz * v;
                }
            }
        }
        acc.clamp(-1.0, 1.0) as f32
    }

    /// True when no voxel carries surface information.
    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|v| v.abs() >= 1.0)
    }

    /// Indices of voxels whose value magnitude is below `band`.
    pub fn surface_voxels(&self, band: f32) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| v.abs() < band).map(|(i, _)| i).collect()
    }

    pub fn into_parts(self) -> (VolumeGrid, Vec<f32>, Option<Vec<f32>>) {
        (self.grid, self.values, self.weights)
    }
}
