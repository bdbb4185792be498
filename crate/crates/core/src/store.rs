//! Persisted last-token embeddings, one `E`-vector per (window, variable).
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "TCMA"
//!      4     2  version (u16) = 1
//!      6     4  embed_dim E (u32)
//!     10     4  num_variables N (u32)
//!     14     8  num_windows W (u64)
//!     22     2  dtype tag (u16), 0 = f32
//!     24  4·W·N·E  payload: f32 values, window-major, then variable, then channel
//!    end     8  CRC-64/ECMA-182 of the payload bytes (u64)
//! ```
//!
//! The vector for `(w, v)` starts at byte `24 + 4·E·(w·N + v)`.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::data::Split;
use crate::error::{Error, Result};
use crate::prompt::{PromptDesign, PromptRecord};

pub const MAGIC: &[u8; 4] = b"TCMA";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u16 = 0;
pub const HEADER_LEN: usize = 24;
pub const TRAILER_LEN: usize = 8;

const CRC64: crc::Crc<u64> = crc::Crc::<u64>::new(&crc::CRC_64_ECMA_182);

pub fn checksum(payload: &[u8]) -> u64 {
    CRC64.checksum(payload)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedKey {
    pub window_id: usize,
    pub variable_id: usize,
}

impl EmbedKey {
    pub fn new(window_id: usize, variable_id: usize) -> Self {
        Self {
            window_id,
            variable_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreHeader {
    pub version: u16,
    pub embed_dim: usize,
    pub num_variables: usize,
    pub num_windows: usize,
    pub dtype: u16,
}

impl StoreHeader {
    pub fn payload_len(&self) -> usize {
        4 * self.num_windows * self.num_variables * self.embed_dim
    }

    pub fn file_len(&self) -> usize {
        HEADER_LEN + self.payload_len() + TRAILER_LEN
    }

    /// Byte offset of the vector for `key` from the start of the file.
    pub fn offset(&self, key: EmbedKey) -> Result<usize> {
        if key.window_id >= self.num_windows || key.variable_id >= self.num_variables {
            return Err(Error::OutOfRange(format!(
                "key ({}, {}) outside {} windows × {} variables",
                key.window_id, key.variable_id, self.num_windows, self.num_variables
            )));
        }
        Ok(
            HEADER_LEN
                + 4 * self.embed_dim * (key.window_id * self.num_variables + key.variable_id),
        )
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..10].copy_from_slice(&(self.embed_dim as u32).to_le_bytes());
        b[10..14].copy_from_slice(&(self.num_variables as u32).to_le_bytes());
        b[14..22].copy_from_slice(&(self.num_windows as u64).to_le_bytes());
        b[22..24].copy_from_slice(&self.dtype.to_le_bytes());
        b
    }

    fn decode(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "{} bytes is shorter than the header",
                b.len()
            )));
        }
        if &b[0..4] != MAGIC {
            return Err(Error::Format("bad magic, not an embedding store".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let u32_at =
            |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes")) as usize;
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported store version {version}"
            )));
        }
        let dtype = u16_at(22);
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!("unsupported dtype tag {dtype}")));
        }
        let num_windows = u64::from_le_bytes(b[14..22].try_into().expect("8 bytes"));
        let header = Self {
            version,
            embed_dim: u32_at(6),
            num_variables: u32_at(10),
            num_windows: usize::try_from(num_windows).unwrap_or(usize::MAX),
            dtype,
        };
        let fits = [header.num_variables, header.embed_dim, 4, 1]
            .iter()
            .try_fold(header.num_windows, |acc, &k| acc.checked_mul(k))
            .and_then(|p| p.checked_add(HEADER_LEN + TRAILER_LEN));
        if fits.is_none() {
            return Err(Error::Format(
                "header dimensions overflow the address space".into(),
            ));
        }
        Ok(header)
    }
}

/// An in-memory, checksum-validated embedding store.
#[derive(Debug, Clone, PartialEq)]
pub struct LastTokenStore {
    header: StoreHeader,
    values: Vec<f32>,
}

impl LastTokenStore {
    /// Wraps a flat `[W][N][E]` buffer.
    pub fn new(
        num_windows: usize,
        num_variables: usize,
        embed_dim: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != num_windows * num_variables * embed_dim {
            return Err(Error::Shape {
                op: "store",
                detail: format!(
                    "{} values for {num_windows} × {num_variables} × {embed_dim}",
                    values.len()
                ),
            });
        }
        Ok(Self {
            header: StoreHeader {
                version: VERSION,
                embed_dim,
                num_variables,
                num_windows,
                dtype: DTYPE_F32,
            },
            values,
        })
    }

    /// Builds a store from nested `[window][variable][channel]` vectors.
    pub fn from_nested(embeddings: &[Vec<Vec<f32>>]) -> Result<Self> {
        let num_windows = embeddings.len();
        let num_variables = embeddings.first().map_or(0, Vec::len);
        let embed_dim = embeddings
            .first()
            .and_then(|w| w.first())
            .map_or(0, Vec::len);
        let mut values = Vec::with_capacity(num_windows * num_variables * embed_dim);
        for (w, vars) in embeddings.iter().enumerate() {
            if vars.len() != num_variables {
                return Err(Error::Shape {
                    op: "store",
                    detail: format!(
                        "window {w} has {} variables, expected {num_variables}",
                        vars.len()
                    ),
                });
            }
            for (v, e) in vars.iter().enumerate() {
                if e.len() != embed_dim {
                    return Err(Error::Shape {
                        op: "store",
                        detail: format!(
                            "vector ({w}, {v}) has {} values, expected {embed_dim}",
                            e.len()
                        ),
                    });
                }
                values.extend_from_slice(e);
            }
        }
        Self::new(num_windows, num_variables, embed_dim, values)
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn embed_dim(&self) -> usize {
        self.header.embed_dim
    }

    pub fn num_variables(&self) -> usize {
        self.header.num_variables
    }

    pub fn num_windows(&self) -> usize {
        self.header.num_windows
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn read_vector(&self, key: EmbedKey) -> Result<&[f32]> {
        let start = (self.header.offset(key)? - HEADER_LEN) / 4;
        Ok(&self.values[start..start + self.header.embed_dim])
    }

    /// The `N × E` block of one window.
    pub fn window_matrix(&self, window_id: usize) -> Result<&[f32]> {
        let start = (self.header.offset(EmbedKey::new(window_id, 0))? - HEADER_LEN) / 4;
        let len = self.header.num_variables * self.header.embed_dim;
        Ok(&self.values[start..start + len])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header.file_len());
        out.extend_from_slice(&self.header.encode());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = checksum(&out[HEADER_LEN..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses and validates size and checksum.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = StoreHeader::decode(bytes)?;
        if bytes.len() != header.file_len() {
            return Err(Error::Format(format!(
                "file is {} bytes, header implies {}",
                bytes.len(),
                header.file_len()
            )));
        }
        let payload = &bytes[HEADER_LEN..HEADER_LEN + header.payload_len()];
        let stored = u64::from_le_bytes(
            bytes[bytes.len() - TRAILER_LEN..]
                .try_into()
                .expect("8 bytes"),
        );
        let computed = checksum(payload);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { header, values })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Writes `[window][variable][channel]` embeddings to `path`.
pub fn write_store(path: impl AsRef<Path>, embeddings: &[Vec<Vec<f32>>]) -> Result<()> {
    LastTokenStore::from_nested(embeddings)?.write(path)
}

/// Reads one vector by seeking to its offset, without loading or
/// checksumming the rest of the file.
pub fn read_vector_at(path: impl AsRef<Path>, key: EmbedKey) -> Result<Vec<f32>> {
    let mut f = File::open(path)?;
    let mut head = [0u8; HEADER_LEN];
    f.read_exact(&mut head)?;
    let header = StoreHeader::decode(&head)?;
    f.seek(SeekFrom::Start(header.offset(key)? as u64))?;
    let mut buf = vec![0u8; 4 * header.embed_dim];
    f.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

/// Store file name for one (dataset, split, lookback, design).
pub fn store_file_name(
    dataset: &str,
    split: Split,
    lookback: usize,
    design: PromptDesign,
) -> String {
    format!("{dataset}_{split}_T{lookback}_{design}.tcma")
}

/// Number of trailing slots holding prompt statistics in a stub vector.
pub const STUB_FEATURES: usize = 4;
const STUB_DOMAIN: &[u8] = b"timecma-stub-embed/v1\0";

/// Deterministic stand-in for a frozen language model.
///
/// The first `E − 4` components are a unit-variance expansion of the SHA-256
/// of the prompt text (uniform on `[−√3, √3]`, drawn from a ChaCha stream
/// seeded with the digest). The last four are the prompt's trend, mean,
/// standard deviation and last value, clamped to `[−10, 10]`. The output
/// depends only on the bytes of the record, never on the platform.
pub fn stub_embed(prompt: &PromptRecord, embed_dim: usize) -> Result<Vec<f32>> {
    if embed_dim < 8 {
        return Err(Error::Usage(format!(
            "stub embedding dim must be at least 8, got {embed_dim}"
        )));
    }
    let mut hasher = Sha256::new();
    hasher.update(STUB_DOMAIN);
    hasher.update(prompt.text.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());

    let sqrt3 = 3.0f32.sqrt();
    let mut out = Vec::with_capacity(embed_dim);
    for _ in 0..embed_dim - STUB_FEATURES {
        // 24 random bits give an exactly representable u ∈ [0, 1).
        let u = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
        out.push((2.0 * u - 1.0) * sqrt3);
    }
    for f in [
        prompt.trend_value,
        prompt.mean,
        prompt.std,
        prompt.last_value,
    ] {
        out.push(f.clamp(-10.0, 10.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_store_payload_bytes() {
        let store = LastTokenStore::new(1, 1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = store.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 16 + TRAILER_LEN);
        let expected: Vec<u8> = [1.0f32, 2.0, 3.0, 4.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert_eq!(&bytes[HEADER_LEN..HEADER_LEN + 16], expected.as_slice());
        assert_eq!(
            store.read_vector(EmbedKey::new(0, 0)).unwrap(),
            &[1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn out_of_range_key() {
        let store = LastTokenStore::new(2, 3, 4, vec![0.0; 24]).unwrap();
        assert!(store.read_vector(EmbedKey::new(2, 0)).is_err());
        assert!(store.read_vector(EmbedKey::new(0, 3)).is_err());
        assert!(store.read_vector(EmbedKey::new(1, 2)).is_ok());
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = LastTokenStore::new(1, 1, 4, vec![0.0; 4])
            .unwrap()
            .to_bytes();
        assert!(matches!(
            LastTokenStore::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        bytes[0] = b'X';
        assert!(matches!(
            LastTokenStore::from_bytes(&bytes),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn nested_dims_must_agree() {
        let ragged = vec![vec![vec![0.0; 4], vec![0.0; 3]]];
        assert!(LastTokenStore::from_nested(&ragged).is_err());
    }

    fn record(text: &str, trend: f32) -> PromptRecord {
        PromptRecord {
            window_id: 0,
            variable_id: 0,
            design: PromptDesign::P5,
            text: text.into(),
            trend_value: trend,
            value_count: 2,
            mean: 0.0,
            std: 1.0,
            last_value: 1.0,
        }
    }

    #[test]
    fn stub_is_deterministic_and_bounded() {
        let r = record(
            "From a to b, the values were 1.00, 3.00 every week. The total trend value is 2.00",
            2.0,
        );
        let a = stub_embed(&r, 64).unwrap();
        assert_eq!(a, stub_embed(&r, 64).unwrap());
        assert!(a.iter().all(|v| v.is_finite() && v.abs() <= 10.0));
        assert!(stub_embed(&r, 7).is_err());
    }

    #[test]
    fn stub_trend_slot_tracks_trend() {
        let a = stub_embed(&record("same text", 2.0), 16).unwrap();
        let b = stub_embed(&record("same text", -1.0), 16).unwrap();
        assert_eq!(a[..12], b[..12]);
        assert_ne!(a[12], b[12]);
    }

    #[test]
    fn file_name_encodes_everything() {
        assert_eq!(
            store_file_name("ili", Split::Val, 36, PromptDesign::P5),
            "ili_val_T36_P5.tcma"
        );
    }
}
