//! The `RIOM` model format: magic, `u32` version, `u32` header length, a JSON
//! header (architecture and training metadata), then every parameter as
//! little-endian `f32` in branch order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{DescriptorModel, ModelSpec, TrainingMeta};
use crate::error::{Result, RioError};
use crate::volume::io::{read_f32s, read_u32, write_f32s};

pub const MAGIC: &[u8; 4] = b"RIOM";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    meta: TrainingMeta,
    parameters: usize,
}

pub fn write_model<W: Write>(mut w: W, model: &DescriptorModel<f32>) -> Result<()> {
    let header = serde_json::to_vec(&Header { spec: model.spec().clone(), meta: model.meta, parameters: model.parameter_count() })?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for b in model.branches() {
        write_f32s(&mut w, b.params())?;
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<DescriptorModel<f32>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(RioError::Format(format!("bad magic {magic:?}, expected \"RIOM\"")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(RioError::Format(format!("unsupported RIOM version {version}")));
    }
    let len = read_u32(&mut r)? as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    let mut model = DescriptorModel::<f32>::zeros(header.spec)?;
    if model.parameter_count() != header.parameters {
        return Err(RioError::Format(format!(
            "header declares {} parameters, architecture has {}",
            header.parameters,
            model.parameter_count()
        )));
    }
    model.meta = header.meta;
    for b in model.branches_mut() {
        let n = b.params().len();
        b.params_mut().copy_from_slice(&read_f32s(&mut r, n)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(RioError::Format("trailing bytes after model parameters".into()));
    }
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &DescriptorModel<f32>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DescriptorModel<f32>> {
    read_model(BufReader::new(File::open(path)?))
}
