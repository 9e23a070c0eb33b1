use std::io::Write;
use std::path::Path;

use super::{create, finish, read_all, write_bytes, Cursor, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RGCK";

/// Writes every entry as f32; values that are not f32-exact are rounded.
pub fn write_checkpoint<W: Write>(w: &mut W, params: &ParamStore) -> std::io::Result<()> {
    write_bytes(w, CHECKPOINT_MAGIC)?;
    write_bytes(w, &FORMAT_VERSION.to_le_bytes())?;
    write_bytes(w, &(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        write_bytes(w, &(name.len() as u16).to_le_bytes())?;
        write_bytes(w, name.as_bytes())?;
        write_bytes(w, &[t.rank() as u8])?;
        for &d in t.shape() {
            write_bytes(w, &(d as u32).to_le_bytes())?;
        }
        let data: Vec<u8> = t.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        write_bytes(w, &data)?;
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, params: &ParamStore) -> Result<()> {
    for (name, t) in params.iter() {
        if name.len() > u16::MAX as usize
            || t.rank() > u8::MAX as usize
            || t.shape().iter().any(|&d| d > u32::MAX as usize)
        {
            return Err(Error::format(format!(
                "parameter {name} does not fit the checkpoint format"
            )));
        }
    }
    let mut w = create(path)?;
    write_checkpoint(&mut w, params).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ParamStore> {
    let mut c = Cursor::new(bytes, "checkpoint");
    c.magic(CHECKPOINT_MAGIC)?;
    c.version()?;
    let count = c.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::format("checkpoint entry name is not UTF-8"))?
            .to_string();
        let rank = c.u8()? as usize;
        let shape = (0..rank)
            .map(|_| c.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| c.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        if store.get(&name).is_some() {
            return Err(Error::format(format!("duplicate checkpoint entry {name}")));
        }
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    c.finish()?;
    Ok(store)
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore> {
    read_checkpoint(&read_all(path)?)
}
