use nalgebra::Point3;

use super::{TsdfVolume, VolumeGrid};
use crate::error::{invalid, Result};

/// Anything with a signed distance field: negative inside solid geometry.
pub trait SignedDistance {
    fn distance(&self, p: &Point3<f64>) -> f64;

    /// True when the field contains no geometry at all.
    fn is_empty(&self) -> bool {
        false
    }
}

/// Samples a signed distance field at every voxel center, clamped to the
/// truncation band and normalized to `[-1, 1]`.
pub fn analytic_tsdf<S: SignedDistance + ?Sized>(scene: &S, grid: &VolumeGrid) -> Result<TsdfVolume> {
    grid.validate()?;
    if scene.is_empty() {
        return invalid("analytic_tsdf needs a non-empty scene");
    }
    let trunc = grid.truncation as f64;
    let values = (0..grid.len())
        .map(|idx| {
            let [x, y, z] = grid.coords(idx);
            let d = scene.distance(&grid.voxel_center(x, y, z));
            (d.clamp(-trunc, trunc) / trunc) as f32
        })
        .collect();
    TsdfVolume::new(*grid, values, None)
}
