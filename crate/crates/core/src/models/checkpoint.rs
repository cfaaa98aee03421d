//! Checkpoint files.
//!
//! ```text
//! 8 bytes   magic "EUQCKPT\0"
//! u32 LE    format version (1)
//! u32 LE    length L of the architecture descriptor
//! L bytes   architecture descriptor, UTF-8 JSON
//! u64 LE    parameter count
//! count x   f64 LE parameters in FlatParams order
//! ```

use std::path::Path;

use super::{Architecture, FlatParams, Model};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"EUQCKPT\0";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &Model) -> Vec<u8> {
    let descriptor = serde_json::to_vec(model.architecture()).expect("architecture serializes");
    let mut out = Vec::with_capacity(24 + descriptor.len() + 8 * model.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(descriptor.len() as u32).to_le_bytes());
    out.extend_from_slice(&descriptor);
    out.extend_from_slice(&(model.num_params() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = *at + n;
    let s = bytes.get(*at..end).ok_or(Error::Length {
        expected: end,
        actual: bytes.len(),
    })?;
    *at = end;
    Ok(s)
}

/// Parses a checkpoint. With `expected = Some(arch)` a different stored
/// architecture is a configuration error.
pub fn read_checkpoint(bytes: &[u8], expected: Option<&Architecture>) -> Result<Model> {
    let mut at = 0;
    if take(bytes, &mut at, 8)? != MAGIC {
        return Err(Error::invalid("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(take(bytes, &mut at, 4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::invalid(format!("unsupported checkpoint version {version}")));
    }
    let len = u32::from_le_bytes(take(bytes, &mut at, 4)?.try_into().expect("4 bytes")) as usize;
    let arch: Architecture = serde_json::from_slice(take(bytes, &mut at, len)?)
        .map_err(|e| Error::invalid(format!("bad architecture descriptor: {e}")))?;
    if let Some(want) = expected {
        if *want != arch {
            return Err(Error::config(
                "model",
                format!("checkpoint holds {arch:?}, configuration asks for {want:?}"),
            ));
        }
    }
    let count = u64::from_le_bytes(take(bytes, &mut at, 8)?.try_into().expect("8 bytes")) as usize;
    let raw = take(bytes, &mut at, count * 8)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Model::from_flat(arch, FlatParams(params))
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, expected: Option<&Architecture>) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes, expected)
}
