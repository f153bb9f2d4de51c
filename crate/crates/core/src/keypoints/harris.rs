use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::volume::{TsdfVolume, VolumeGrid};

/// A detected interest point in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    #[serde(with = "point_serde")]
    pub position: Point3<f64>,
    pub response: f64,
}

pub(crate) mod point_serde {
    use nalgebra::Point3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &Point3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [p.x, p.y, p.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point3<f64>, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Point3::from(a))
    }
}

/// Total order used everywhere keypoints are ranked: response descending,
/// then position lexicographically ascending.
pub fn keypoint_order(a: &Keypoint, b: &Keypoint) -> std::cmp::Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.position.x.total_cmp(&b.position.x))
        .then(a.position.y.total_cmp(&b.position.y))
        .then(a.position.z.total_cmp(&b.position.z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarrisConfig {
    /// Weight of the `trace³` term. Must stay below 1/27 for an isotropic
    /// corner to score positively.
    pub k: f64,
    /// Half-width of the cubic structure-tensor window, in voxels.
    pub gradient_radius: usize,
    pub min_response: f64,
    /// Only voxels with `|tsdf| <` this value are candidates.
    pub surface_band: f32,
    /// Refined pairs are accepted when the refined response reaches this
    /// fraction of the volume's maximum response.
    pub pairing_fraction: f64,
}

impl Default for HarrisConfig {
    fn default() -> Self {
        HarrisConfig { k: 0.01, gradient_radius: 2, min_response: 1e-4, surface_band: 0.5, pairing_fraction: 0.1 }
    }
}

impl HarrisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k <= 0.25) {
            return invalid(format!("harris k must lie in (0, 0.25], got {}", self.k));
        }
        if self.gradient_radius == 0 {
            return invalid("gradient_radius must be at least 1 voxel");
        }
        if !self.min_response.is_finite() {
            return invalid("min_response must be finite");
        }
        if !(self.surface_band > 0.0 && self.surface_band <= 1.0) {
            return invalid("surface_band must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.pairing_fraction) {
            return invalid("pairing_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// `det(M) − k·trace(M)³` for a symmetric tensor stored as
/// `[xx, xy, xz, yy, yz, zz]`.
#[inline]
pub fn harris_response(m: &[f64; 6], k: f64) -> f64 {
    let [xx, xy, xz, yy, yz, zz] = *m;
    let det = xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz);
    let tr = xx + yy + zz;
    det - k * tr * tr * tr
}

/// Central-difference gradient of the TSDF at a voxel, in normalized TSDF
/// units per voxel. At the grid edge the difference is one-sided, so the
/// volume boundary itself never looks like a surface.
#[inline]
pub fn tsdf_gradient(volume: &TsdfVolume, x: usize, y: usize, z: usize) -> [f64; 3] {
    let dims = volume.dims();
    let at = [x, y, z];
    let mut g = [0.0; 3];
    for (a, ga) in g.iter_mut().enumerate() {
        let lo = at[a].saturating_sub(1);
        let hi = (at[a] + 1).min(dims[a] - 1);
        if hi > lo {
            let (mut p, mut q) = (at, at);
            p[a] = lo;
            q[a] = hi;
            *ga = (volume.at(q[0], q[1], q[2]) - volume.at(p[0], p[1], p[2])) as f64 / (hi - lo) as f64;
        }
    }
    g
}

/// Harris responses for every voxel of a volume; non-candidates hold `-∞`.
#[derive(Debug, Clone)]
pub struct ResponseField {
    grid: VolumeGrid,
    response: Vec<f64>,
    max_response: f64,
}

impl ResponseField {
    pub fn compute(volume: &TsdfVolume, config: &HarrisConfig) -> Result<Self> {
        config.validate()?;
        let grid = *volume.grid();
        let n = grid.len();
        let [dx, dy, dz] = grid.dims;
        if volume.is_degenerate() {
            return Ok(ResponseField { grid, response: vec![f64::NEG_INFINITY; n], max_response: f64::NEG_INFINITY });
        }
        // six tensor channels, box-filtered separably
        let mut chans = vec![vec![0f64; n]; 6];
        for z in 0..dz {
            for y in 0..dy {
                for x in 0..dx {
                    let g = tsdf_gradient(volume, x, y, z);
                    let i = grid.index(x, y, z);
                    chans[0][i] = g[0] * g[0];
                    chans[1][i] = g[0] * g[1];
                    chans[2][i] = g[0] * g[2];
                    chans[3][i] = g[1] * g[1];
                    chans[4][i] = g[1] * g[2];
                    chans[5][i] = g[2] * g[2];
                }
            }
        }
        let r = config.gradient_radius;
        for ch in chans.iter_mut() {
            box_sum_axis(ch, grid.dims, 0, r);
            box_sum_axis(ch, grid.dims, 1, r);
            box_sum_axis(ch, grid.dims, 2, r);
        }
        let band = config.surface_band;
        let mut response = vec![f64::NEG_INFINITY; n];
        let mut max_response = f64::NEG_INFINITY;
        for (i, (resp, v)) in response.iter_mut().zip(volume.values()).enumerate() {
            if v.abs() < band {
                let m = [chans[0][i], chans[1][i], chans[2][i], chans[3][i], chans[4][i], chans[5][i]];
                *resp = harris_response(&m, config.k);
                max_response = max_response.max(*resp);
            }
        }
        Ok(ResponseField { grid, response, max_response })
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn max_response(&self) -> f64 {
        self.max_response
    }

    /// Keypoints at every voxel whose response reaches `min_response`,
    /// ranked by [`keypoint_order`].
    pub fn keypoints(&self, min_response: f64) -> Vec<Keypoint> {
        let mut out: Vec<Keypoint> = self
            .response
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_finite() && **r >= min_response)
            .map(|(i, r)| {
                let [x, y, z] = self.grid.coords(i);
                Keypoint { position: self.grid.voxel_center(x, y, z), response: *r }
            })
            .collect();
        out.sort_by(keypoint_order);
        out
    }

    /// Highest-response voxel within `radius` of `center`, if any candidate
    /// lies there. Ties go to the lexicographically smallest position.
    pub fn best_within(&self, center: &Point3<f64>, radius: f64) -> Option<Keypoint> {
        let g = self.grid.to_grid(center);
        let rv = radius / self.grid.voxel_size as f64;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let l = (g[a] - rv).ceil();
            let h = (g[a] + rv).floor();
            if !l.is_finite() || !h.is_finite() || h < 0.0 || l > (self.grid.dims[a] - 1) as f64 {
                return None;
            }
            lo[a] = l.max(0.0) as usize;
            hi[a] = h.min((self.grid.dims[a] - 1) as f64) as usize;
        }
        let mut best: Option<Keypoint> = None;
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let r = self.response[self.grid.index(x, y, z)];
                    if !r.is_finite() {
                        continue;
                    }
                    let p = self.grid.voxel_center(x, y, z);
                    if (p - center).norm() > radius {
                        continue;
                    }
                    let cand = Keypoint { position: p, response: r };
                    if best.as_ref().is_none_or(|b| keypoint_order(&cand, b).is_lt()) {
                        best = Some(cand);
                    }
                }
            }
        }
        best
    }

    /// Re-detects a keypoint from another volume on this one: the strongest
    /// voxel within `search_radius`, rejected when it falls below
    /// `pairing_fraction` of this volume's maximum response.
    pub fn refine(&self, keypoint: &Keypoint, search_radius: f64, pairing_fraction: f64) -> Option<Keypoint> {
        if !self.max_response.is_finite() || self.max_response <= 0.0 {
            return None;
        }
        let best = self.best_within(&keypoint.position, search_radius)?;
        (best.response >= pairing_fraction * self.max_response && best.response > 0.0).then_some(best)
    }
}

/// In-place sum over a window of `±r` voxels along one axis (zero padding).
fn box_sum_axis(data: &mut [f64], dims: [usize; 3], axis: usize, r: usize) {
    let len = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut line = vec![0f64; len];
    let mut prefix = vec![0f64; len + 1];
    let (outer_a, outer_b) = match axis {
        0 => (dims[1], dims[2]),
        1 => (dims[0], dims[2]),
        _ => (dims[0], dims[1]),
    };
    for b in 0..outer_b {
        for a in 0..outer_a {
            let base = match axis {
                0 => dims[0] * (a + dims[1] * b),
                1 => a + dims[0] * dims[1] * b,
                _ => a + dims[0] * b,
            };
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[base + i * stride];
            }
            for i in 0..len {
                prefix[i + 1] = prefix[i] + line[i];
            }
            for i in 0..len {
                let lo = i.saturating_sub(r);
                let hi = (i + r + 1).min(len);
                data[base + i * stride] = prefix[hi] - prefix[lo];
            }
        }
    }
}

/// Harris 3D keypoints of a TSDF volume: every near-surface voxel whose
/// structure-tensor response reaches `min_response`, strongest first.
pub fn harris3d(volume: &TsdfVolume, config: &HarrisConfig) -> Result<Vec<Keypoint>> {
    let field = ResponseField::compute(volume, config)?;
    Ok(field.keypoints(config.min_response))
}

/// Convenience wrapper around [`ResponseField::refine`] for a single query.
pub fn refine_on(volume_b: &TsdfVolume, keypoint: &Keypoint, search_radius: f64, config: &HarrisConfig) -> Result<Option<Keypoint>> {
    let field = ResponseField::compute(volume_b, config)?;
    Ok(field.refine(keypoint, search_radius, config.pairing_fraction))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_of_isotropic_and_planar_tensors() {
        let iso = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        assert!((harris_response(&iso, 0.01) - (1.0 - 0.27)).abs() < 1e-12);
        let plane = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(harris_response(&plane, 0.01) < 0.0);
    }

    #[test]
    fn box_sum_matches_naive() {
        let dims = [5, 4, 3];
        let n = 60;
        let orig: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64).collect();
        let mut fast = orig.clone();
        for a in 0..3 {
            box_sum_axis(&mut fast, dims, a, 1);
        }
        for z in 0..3i64 {
            for y in 0..4i64 {
                for x in 0..5i64 {
                    let mut s = 0.0;
                    for dz in -1..=1 {
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                let (a, b, c) = (x + dx, y + dy, z + dz);
                                if a >= 0 && b >= 0 && c >= 0 && a < 5 && b < 4 && c < 3 {
                                    s += orig[(a + 5 * (b + 4 * c)) as usize];
                                }
                            }
                        }
                    }
                    assert!((fast[(x + 5 * (y + 4 * z)) as usize] - s).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(HarrisConfig { k: 0.0, ..Default::default() }.validate().is_err());
        assert!(HarrisConfig { k: 0.3, ..Default::default() }.validate().is_err());
        assert!(HarrisConfig { gradient_radius: 0, ..Default::default() }.validate().is_err());
    }
}
