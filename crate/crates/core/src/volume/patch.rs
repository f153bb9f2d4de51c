use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TsdfVolume;
use crate::error::{invalid, Result};

/// A cubic grid of TSDF samples (raw or inverted), x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    resolution: usize,
    extent: f32,
    inverted: bool,
    values: Vec<f32>,
}

impl Patch {
    pub fn from_values(resolution: usize, extent: f32, inverted: bool, values: Vec<f32>) -> Result<Self> {
        if values.len() != resolution.pow(3) {
            return invalid(format!("patch of resolution {resolution} needs {} values, got {}", resolution.pow(3), values.len()));
        }
        Ok(Patch { resolution, extent, inverted, values })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn extent(&self) -> f32 {
        self.extent
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        let r = self.resolution;
        self.values[x + r * (y + r * z)]
    }

    /// Value representing empty space: `+1` raw, `0` after inversion.
    pub fn background(&self) -> f32 {
        if self.inverted {
            0.0
        } else {
            1.0
        }
    }

    /// Applies one of the 24 axis-aligned rotations about the patch's array
    /// center. Exact: a signed permutation of the samples.
    pub fn rotate_cube(&self, rot: &CubeRotation) -> Patch {
        let r = self.resolution as i64;
        let mut out = vec![0.0f32; self.values.len()];
        // doubled coordinates relative to the array center keep everything integral
        for z in 0..r {
            for y in 0..r {
                for x in 0..r {
                    let c = [2 * x - (r - 1), 2 * y - (r - 1), 2 * z - (r - 1)];
                    // source = Rᵀ · c
                    let mut s = [0i64; 3];
                    for (a, sa) in s.iter_mut().enumerate() {
                        *sa = (0..3).map(|b| rot.m[b][a] as i64 * c[b]).sum::<i64>();
                    }
                    let sx = ((s[0] + r - 1) / 2) as usize;
                    let sy = ((s[1] + r - 1) / 2) as usize;
                    let sz = ((s[2] + r - 1) / 2) as usize;
                    out[(x + r * (y + r * z)) as usize] = self.at(sx, sy, sz);
                }
            }
        }
        Patch { values: out, ..*self }
    }

    /// Arbitrary rotation about the array center with trilinear resampling.
    /// Samples falling outside the patch take the background value.
    pub fn rotate_trilinear(&self, rotation: &Matrix3<f64>) -> Patch {
        let r = self.resolution;
        let half = (r as f64 - 1.0) / 2.0;
        let rt = rotation.transpose();
        let bg = self.background() as f64;
        let lookup = |x: i64, y: i64, z: i64| -> f64 {
            if x < 0 || y < 0 || z < 0 || x >= r as i64 || y >= r as i64 || z >= r as i64 {
                bg
            } else {
                self.at(x as usize, y as usize, z as usize) as f64
            }
        };
        let mut out = Vec::with_capacity(self.values.len());
        for z in 0..r {
            for y in 0..r {
                for x in 0..r {
                    let c = Vector3::new(x as f64 - half, y as f64 - half, z as f64 - half);
                    let s = rt * c + Vector3::repeat(half);
                    let mut base = [0i64; 3];
                    let mut frac = [0f64; 3];
                    for a in 0..3 {
                        let v = if (s[a] - s[a].round()).abs() < 1e-9 { s[a].round() } else { s[a] };
                        base[a] = v.floor() as i64;
                        frac[a] = v - v.floor();
                    }
                    let mut acc = 0.0;
                    for dz in 0..2i64 {
                        for dy in 0..2i64 {
                            for dx in 0..2i64 {
                                let w = (if dx == 0 { 1.0 - frac[0] } else { frac[0] })
                                    * (if dy == 0 { 1.0 - frac[1] } else { frac[1] })
                                    * (if dz == 0 { 1.0 - frac[2] } else { frac[2] });
                                if w != 0.0 {
                                    acc += w * lookup(base[0] + dx, base[1] + dy, base[2] + dz);
                                }
                            }
                        }
                    }
                    out.push(acc as f32);
                }
            }
        }
        Patch { values: out, ..*self }
    }
}

/// A proper rotation whose matrix is a signed permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CubeRotation {
    pub m: [[i8; 3]; 3],
}

impl CubeRotation {
    pub fn identity() -> Self {
        CubeRotation { m: [[1, 0, 0], [0, 1, 0], [0, 0, 1]] }
    }

    /// All 24 rotations of the cube, identity first.
    pub fn all() -> Vec<CubeRotation> {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(24);
        for p in perms {
            for signs in 0..8u8 {
                let mut m = [[0i8; 3]; 3];
                for row in 0..3 {
                    m[row][p[row]] = if signs >> row & 1 == 1 { -1 } else { 1 };
                }
                let rot = CubeRotation { m };
                if rot.matrix().determinant() > 0.0 {
                    out.push(rot);
                }
            }
        }
        out
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m[i][j] as f64)
    }
}

/// Extents and resolution of the two patch scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchPairSpec {
    pub fine_extent: f32,
    pub coarse_extent: f32,
    pub resolution: usize,
}

impl Default for PatchPairSpec {
    fn default() -> Self {
        PatchPairSpec { fine_extent: 0.6, coarse_extent: 1.2, resolution: 32 }
    }
}

impl PatchPairSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fine_extent > 0.0) || !(self.coarse_extent > self.fine_extent) {
            return invalid(format!(
                "patch extents must satisfy coarse > fine > 0, got fine={} coarse={}",
                self.fine_extent, self.coarse_extent
            ));
        }
        if self.resolution < 8 || self.resolution % 2 != 0 {
            return invalid(format!("patch resolution must be even and ≥ 8, got {}", self.resolution));
        }
        Ok(())
    }

    pub fn fine_voxel_size(&self) -> f32 {
        self.fine_extent / self.resolution as f32
    }

    pub fn coarse_voxel_size(&self) -> f32 {
        self.coarse_extent / self.resolution as f32
    }
}

/// Resamples `volume` on a `resolution³` grid of side `extent` around `center`.
///
/// Sample `i` along an axis sits at `center + (i − resolution/2)·extent/resolution`,
/// so the center itself is a sample and a grid aligned with the volume's
/// voxels reproduces them exactly.
pub fn extract_patch(volume: &TsdfVolume, center: &Point3<f64>, extent: f32, resolution: usize) -> Result<Patch> {
    if resolution < 2 {
        return invalid(format!("patch resolution must be ≥ 2, got {resolution}"));
    }
    if !center.iter().all(|v| v.is_finite()) {
        return invalid("patch center is not finite");
    }
    if !(extent > 0.0) {
        return invalid(format!("patch extent must be positive, got {extent}"));
    }
    let step = extent as f64 / resolution as f64;
    let half = (resolution / 2) as f64;
    let offsets: Vec<f64> = (0..resolution).map(|i| (i as f64 - half) * step).collect();
    let mut values = Vec::with_capacity(resolution.pow(3));
    for oz in &offsets {
        for oy in &offsets {
            for ox in &offsets {
                let p = Point3::new(center.x + ox, center.y + oy, center.z + oz);
                values.push(volume.sample(&p));
            }
        }
    }
    Ok(Patch { resolution, extent, inverted: false, values })
}

/// Maps each TSDF value `v` to `1 − |v|`: surfaces become 1, empty space 0.
pub fn invert_tsdf(patch: &Patch) -> Patch {
    Patch {
        values: patch.values.iter().map(|v| 1.0 - v.abs()).collect(),
        inverted: true,
        ..*patch
    }
}

/// The two scales of one location, as fed to the descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub fine: Patch,
    pub coarse: Patch,
}

impl PatchPair {
    /// Rotates both scales by the same cube rotation.
    pub fn rotate_cube(&self, rot: &CubeRotation) -> PatchPair {
        PatchPair { fine: self.fine.rotate_cube(rot), coarse: self.coarse.rotate_cube(rot) }
    }

    pub fn rotate_trilinear(&self, rotation: &Matrix3<f64>) -> PatchPair {
        PatchPair { fine: self.fine.rotate_trilinear(rotation), coarse: self.coarse.rotate_trilinear(rotation) }
    }
}

/// Fine and coarse patches around one center, both inverted.
pub fn extract_two_scale(volume: &TsdfVolume, center: &Point3<f64>, spec: &PatchPairSpec) -> Result<PatchPair> {
    spec.validate()?;
    let fine = extract_patch(volume, center, spec.fine_extent, spec.resolution)?;
    let coarse = extract_patch(volume, center, spec.coarse_extent, spec.resolution)?;
    Ok(PatchPair { fine: invert_tsdf(&fine), coarse: invert_tsdf(&coarse) })
}
