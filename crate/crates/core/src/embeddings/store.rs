//! Binary store of precomputed word-level features.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes  "WEMB"
//! version  u32      1
//! d_f      u32
//! records until end of file:
//!   id_len u32, id (UTF-8, id_len bytes)
//!   n_rows u32, n_rows * d_f f32 values, row-major
//! ```
//!
//! `n_rows` counts words only; the root row is not stored.

use std::collections::HashMap;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const STORE_MAGIC: &[u8; 4] = b"WEMB";
pub const STORE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    d_f: usize,
    records: HashMap<String, (usize, Vec<f32>)>,
}

fn truncated(what: &str) -> Error {
    Error::Format(format!("embedding store truncated while reading {what}"))
}

impl EmbeddingStore {
    pub fn new(d_f: usize) -> Result<Self> {
        if d_f == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        Ok(EmbeddingStore {
            d_f,
            records: HashMap::new(),
        })
    }

    pub fn d_f(&self) -> usize {
        self.d_f
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    /// Adds word rows for a document; values are stored as f32.
    pub fn insert(&mut self, id: impl Into<String>, rows: &Tensor) -> Result<()> {
        if rows.shape().len() != 2 || rows.cols() != self.d_f {
            return Err(Error::config(format!(
                "rows of shape {:?} do not match store dimension {}",
                rows.shape(),
                self.d_f
            )));
        }
        let values = rows.data().iter().map(|&v| v as f32).collect();
        self.records.insert(id.into(), (rows.rows(), values));
        Ok(())
    }

    /// Word rows of a document, checked against its word count.
    pub fn rows(&self, id: &str, n_words: usize) -> Result<Tensor> {
        let (n, values) = self
            .records
            .get(id)
            .ok_or_else(|| Error::Lookup(format!("document {id:?} not in embedding store")))?;
        if *n != n_words {
            return Err(Error::Integrity(format!(
                "document {id:?} has {n} stored rows for {n_words} words"
            )));
        }
        Tensor::new(vec![*n, self.d_f], values.iter().map(|&v| v as f64).collect())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
        if &magic != STORE_MAGIC {
            return Err(Error::Format("not an embedding store (bad magic)".into()));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(|_| truncated("version"))?;
        if version != STORE_VERSION {
            return Err(Error::Format(format!("unsupported embedding store version {version}")));
        }
        let d_f = cur.read_u32::<LittleEndian>().map_err(|_| truncated("dimension"))? as usize;
        if d_f == 0 {
            return Err(Error::Format("embedding store dimension is zero".into()));
        }
        let mut store = EmbeddingStore::new(d_f)?;
        while (cur.position() as usize) < bytes.len() {
            let id_len = cur.read_u32::<LittleEndian>().map_err(|_| truncated("id length"))? as usize;
            let remaining = bytes.len() - cur.position() as usize;
            if id_len > remaining {
                return Err(truncated("document id"));
            }
            let mut id = vec![0u8; id_len];
            cur.read_exact(&mut id).map_err(|_| truncated("document id"))?;
            let id = String::from_utf8(id)
                .map_err(|_| Error::Format("document id is not valid UTF-8".into()))?;
            let n_rows = cur.read_u32::<LittleEndian>().map_err(|_| truncated("row count"))? as usize;
            let count = n_rows
                .checked_mul(d_f)
                .filter(|c| c.checked_mul(4).is_some_and(|b| b <= bytes.len() - cur.position() as usize))
                .ok_or_else(|| truncated("rows"))?;
            let mut values = vec![0f32; count];
            cur.read_f32_into::<LittleEndian>(&mut values).map_err(|_| truncated("rows"))?;
            if store.records.insert(id.clone(), (n_rows, values)).is_some() {
                return Err(Error::Format(format!("duplicate document id {id:?}")));
            }
        }
        Ok(store)
    }

    /// Serializes with records sorted by id so output is reproducible.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(STORE_MAGIC);
        out.write_u32::<LittleEndian>(STORE_VERSION).unwrap();
        out.write_u32::<LittleEndian>(self.d_f as u32).unwrap();
        let mut ids: Vec<&String> = self.records.keys().collect();
        ids.sort();
        for id in ids {
            let (n, values) = &self.records[id];
            out.write_u32::<LittleEndian>(id.len() as u32).unwrap();
            out.write_all(id.as_bytes()).unwrap();
            out.write_u32::<LittleEndian>(*n as u32).unwrap();
            for v in values {
                out.write_f32::<LittleEndian>(*v).unwrap();
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

pub fn load_precomputed(path: &Path) -> Result<EmbeddingStore> {
    EmbeddingStore::from_bytes(&fs::read(path)?)
}
