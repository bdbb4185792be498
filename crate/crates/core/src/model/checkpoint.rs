//! Binary checkpoint: a versioned header, the model config as JSON, then
//! every parameter by name.
//!
//! ```text
//! "TCMK" | version u16 | meta_len u32 | meta JSON {config, seed, extra}
//! count u32 | count × ( name_len u16 | name | kind u8 | ndim u8 | dims u32… | f32 payload )
//! CRC-64/ECMA-182 of everything before it (u64)
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::store::checksum;
use crate::tensor::{ParamKind, ParamRegistry, Tensor};

const MAGIC: &[u8; 4] = b"TCMK";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    seed: u64,
    extra: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub seed: u64,
    /// Free-form provenance (experiment hash, best epoch, ...).
    pub extra: serde_json::Value,
    pub params: ParamRegistry,
}

fn kind_tag(kind: ParamKind) -> u8 {
    match kind {
        ParamKind::Weight => 0,
        ParamKind::Bias => 1,
        ParamKind::Norm => 2,
    }
}

fn tag_kind(tag: u8) -> Result<ParamKind> {
    match tag {
        0 => Ok(ParamKind::Weight),
        1 => Ok(ParamKind::Bias),
        2 => Ok(ParamKind::Norm),
        t => Err(Error::Format(format!("unknown parameter kind tag {t}"))),
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&Meta {
        config: ckpt.config.clone(),
        seed: ckpt.seed,
        extra: ckpt.extra.clone(),
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(ckpt.params.len() as u32).to_le_bytes());
    for (name, t, kind) in ckpt.params.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(kind_tag(kind));
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 + 2 + 4 + 4 + 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(trailer.try_into().expect("8 bytes"));
    let computed = checksum(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut c = Cursor {
        bytes: body,
        pos: 4,
    };
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let meta_len = c.u32()? as usize;
    let meta: Meta = serde_json::from_slice(c.take(meta_len)?)?;
    let count = c.u32()? as usize;
    let mut params = ParamRegistry::new(meta.seed);
    for _ in 0..count {
        let name_len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
            .to_string();
        let kind = tag_kind(c.u8()?)?;
        let ndim = c.u8()? as usize;
        let shape = (0..ndim)
            .map(|_| c.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = c
            .take(4 * n)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        params.insert(&name, Tensor::new(shape, data)?, kind)?;
    }
    if c.pos != body.len() {
        return Err(Error::Format("trailing bytes after parameters".into()));
    }
    Ok(Checkpoint {
        config: meta.config,
        seed: meta.seed,
        extra: meta.extra,
        params,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
