//! The `RIOT` binary volume format.
//!
//! Layout, all little-endian: magic `"RIOT"`, `u32` version (1), `u32 dims[3]`,
//! `f32 voxel_size`, `f32 origin[3]`, `f32 truncation`, `u8 has_weights`, then
//! `f32` values with x fastest, then `f32` weights when flagged.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{TsdfVolume, VolumeGrid};
use crate::error::{Result, RioError};

pub const MAGIC: &[u8; 4] = b"RIOT";
pub const VERSION: u32 = 1;

pub fn write_volume<W: Write>(mut w: W, volume: &TsdfVolume) -> Result<()> {
    let g = volume.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in g.dims {
        let d = u32::try_from(d).map_err(|_| RioError::Format(format!("dimension {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&g.voxel_size.to_le_bytes())?;
    for o in g.origin {
        w.write_all(&o.to_le_bytes())?;
    }
    w.write_all(&g.truncation.to_le_bytes())?;
    w.write_all(&[volume.weights().is_some() as u8])?;
    write_f32s(&mut w, volume.values())?;
    if let Some(weights) = volume.weights() {
        write_f32s(&mut w, weights)?;
    }
    Ok(())
}

pub fn read_volume<R: Read>(mut r: R) -> Result<TsdfVolume> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(RioError::Format(format!("bad magic {magic:?}, expected \"RIOT\"")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(RioError::Format(format!("unsupported RIOT version {version}")));
    }
    let dims = [read_u32(&mut r)? as usize, read_u32(&mut r)? as usize, read_u32(&mut r)? as usize];
    let voxel_size = read_f32(&mut r)?;
    let origin = [read_f32(&mut r)?, read_f32(&mut r)?, read_f32(&mut r)?];
    let truncation = read_f32(&mut r)?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let grid = VolumeGrid::new(dims, voxel_size, origin, truncation)?;
    let n = grid.len();
    let values = read_f32s(&mut r, n)?;
    let weights = match flag[0] {
        0 => None,
        1 => Some(read_f32s(&mut r, n)?),
        f => return Err(RioError::Format(format!("bad has_weights flag {f}"))),
    };
    TsdfVolume::new(grid, values, weights)
}

pub fn save_volume(path: impl AsRef<Path>, volume: &TsdfVolume) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_volume(&mut w, volume)?;
    w.flush()?;
    Ok(())
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<TsdfVolume> {
    read_volume(BufReader::new(File::open(path)?))
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, data: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let grid = VolumeGrid::new([2, 1, 1], 0.5, [1.0, 2.0, 3.0], 0.25).unwrap();
        let vol = TsdfVolume::new(grid, vec![0.5, -0.25], None).unwrap();
        let mut buf = Vec::new();
        write_volume(&mut buf, &vol).unwrap();
        assert_eq!(&buf[0..4], b"RIOT");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(buf[40], 0, "has_weights flag");
        assert_eq!(buf.len(), 41 + 2 * 4);
        assert_eq!(f32::from_le_bytes(buf[41..45].try_into().unwrap()), 0.5);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_volume(&b"RIOX\x01\0\0\0"[..]).is_err());
        let grid = VolumeGrid::new([2, 2, 2], 0.5, [0.0; 3], 0.25).unwrap();
        let vol = TsdfVolume::empty(grid).unwrap();
        let mut buf = Vec::new();
        write_volume(&mut buf, &vol).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(read_volume(&buf[..]).is_err());
    }
}
