//! Binary embedding store.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ADEE" | version: u32 = 1 | dim: u32 | count: u64
//! count x ( key_len: u16 | key: utf-8 | dim x f32 )
//! ```
//!
//! Records are written in ascending key order so identical contents always
//! produce identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::EmbeddingVector;

pub const MAGIC: &[u8; 4] = b"ADEE";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// In-memory collection of same-dimension embeddings, ordered by key.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(Error::Config(format!("invalid store dim {dim}")));
        }
        Ok(Self {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    pub fn from_vectors(dim: usize, vectors: impl IntoIterator<Item = EmbeddingVector>) -> Result<Self> {
        let mut store = Self::new(dim)?;
        for v in vectors {
            store.insert(v)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, vector: EmbeddingVector) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.dim(),
            });
        }
        if vector.key().len() > u16::MAX as usize {
            return Err(Error::Format(format!(
                "key of {} bytes exceeds the 65535-byte limit",
                vector.key().len()
            )));
        }
        if self.vectors.contains_key(vector.key()) {
            return Err(Error::DuplicateKey(vector.key().to_string()));
        }
        self.vectors.insert(vector.key().to_string(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(key)
    }

    pub fn require(&self, key: &str) -> Result<&EmbeddingVector> {
        self.get(key)
            .ok_or_else(|| Error::MissingEmbedding(key.to_string()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.vectors.contains_key(key)
    }

    /// Ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingVector> {
        self.vectors.values()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let record_len = 2 + 4 * self.dim;
        let mut buf = Vec::with_capacity(HEADER_LEN + self.len() * (record_len + 16));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (key, v) in &self.vectors {
            buf.extend_from_slice(&(key.len() as u16).to_le_bytes());
            buf.extend_from_slice(key.as_bytes());
            for x in v.values() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(cur.array()?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(cur.array()?) as usize;
        if dim == 0 {
            return Err(Error::Format("dim is 0".into()));
        }
        let count = u64::from_le_bytes(cur.array()?);
        let mut store = Self::new(dim)?;
        for _ in 0..count {
            let key_len = u16::from_le_bytes(cur.array()?) as usize;
            let key = std::str::from_utf8(cur.take(key_len)?)
                .map_err(|e| Error::Format(format!("key is not utf-8: {e}")))?
                .to_string();
            let raw = cur.take(4 * dim)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let v = EmbeddingVector::new(key, values).map_err(|e| Error::Format(e.to_string()))?;
            store.insert(v).map_err(|e| Error::Format(e.to_string()))?;
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {count} records",
                bytes.len() - cur.pos
            )));
        }
        Ok(store)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
}

pub fn write_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&store.to_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// The two embedding spaces the labelers read from: CLIP (images and
/// prompts) and DINO (images). Both may point at the same store.
#[derive(Debug, Clone)]
pub struct Embeddings {
    clip: Arc<EmbeddingStore>,
    dino: Arc<EmbeddingStore>,
}

impl Embeddings {
    pub fn new(clip: EmbeddingStore, dino: EmbeddingStore) -> Self {
        Self {
            clip: Arc::new(clip),
            dino: Arc::new(dino),
        }
    }

    pub fn shared(store: EmbeddingStore) -> Self {
        let store = Arc::new(store);
        Self {
            clip: Arc::clone(&store),
            dino: store,
        }
    }

    pub fn clip_store(&self) -> &EmbeddingStore {
        &self.clip
    }

    pub fn dino_store(&self) -> &EmbeddingStore {
        &self.dino
    }

    pub fn clip(&self, key: &str) -> Result<&EmbeddingVector> {
        self.clip.require(key)
    }

    pub fn dino(&self, key: &str) -> Result<&EmbeddingVector> {
        self.dino.require(key)
    }
}
