//! Flat binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"LFCK"  u32 version
//! [u8; 32] SHA-256 digest of the config JSON
//! u32 config JSON length, config JSON bytes
//! u32 tensor count
//! per tensor: u32 name length, name (UTF-8), u32 rows, u32 cols,
//!             rows * cols f64 in row-major order
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{EncoderConfig, ModelParams};
use crate::error::{Error, Result};
use crate::sampler::ByteCursor;

const MAGIC: &[u8; 4] = b"LFCK";
const VERSION: u32 = 1;

pub fn write_checkpoint(params: &ModelParams, mut out: impl Write) -> std::io::Result<()> {
    let json = serde_json::to_vec(&params.config).expect("config serializes");
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&params.config.digest())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    let tensors = params.named();
    out.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.nrows() as u32).to_le_bytes())?;
        out.write_all(&(t.ncols() as u32).to_le_bytes())?;
        for x in t.iter() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn checkpoint_bytes(params: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf).expect("writing to memory");
    buf
}

/// Hex SHA-256 of the checkpoint bytes.
pub fn checkpoint_digest(params: &ModelParams) -> String {
    hex(&Sha256::digest(checkpoint_bytes(params)))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut cur = ByteCursor::new(bytes);
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let digest = cur.take(32)?.to_vec();
    let len = cur.u32()? as usize;
    let config: EncoderConfig = serde_json::from_slice(cur.take(len)?)
        .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    if config.digest()[..] != digest[..] {
        return Err(Error::Format("checkpoint config digest mismatch".into()));
    }
    config.validate()?;

    let mut params = ModelParams::zeros(&config)?;
    let count = cur.u32()? as usize;
    let mut slots = params.named_mut();
    if count != slots.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {count} tensors, config implies {}",
            slots.len()
        )));
    }
    for (expected, slot) in slots.iter_mut() {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        if name != expected {
            return Err(Error::Format(format!("expected tensor {expected}, found {name}")));
        }
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        if (rows, cols) != slot.dim() {
            return Err(Error::Format(format!(
                "tensor {name} is {rows}x{cols}, expected {:?}",
                slot.dim()
            )));
        }
        let data = (0..rows * cols).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        **slot = Array2::from_shape_vec((rows, cols), data).expect("shape checked");
    }
    drop(slots);
    if !cur.is_done() {
        return Err(Error::Format("trailing bytes after tensors".into()));
    }
    params.check_finite()?;
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
