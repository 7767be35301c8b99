//! Embedding stores and pair manifests.
//!
//! # Store file layout
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      b"FGRN"                       4 bytes
//! version    u16 = 1
//! flags      u16 (bit 0 = normalized)
//! dim        u32
//! count      u64
//! index      count × (id_len u16, id bytes UTF-8, payload offset u64)
//! payload    count × dim × f32
//! ```
//!
//! Payload offsets are absolute byte offsets from the start of the file.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FGRN";
pub const FORMAT_VERSION: u16 = 1;
const FLAG_NORMALIZED: u16 = 0b1;
const FIXED_HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8;

/// Tolerance on `| ||v|| - 1 |` for stores flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("malformed store header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("malformed manifest line {line}: {detail}")]
    MalformedManifest { line: usize, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// Immutable, id-indexed collection of fixed-dimension `f32` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    normalized: bool,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    /// Builds a store after checking every invariant: equal lengths, unique
    /// ids, finite components and, when `normalized`, unit L2 norms.
    pub fn new<I, S>(dim: usize, entries: I, normalized: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(StoreError::InvariantViolation(
                "dimension must be positive".into(),
            ));
        }
        if dim > u32::MAX as usize {
            return Err(StoreError::InvariantViolation(format!(
                "dimension {dim} does not fit the on-disk u32 field"
            )));
        }
        let mut store = EmbeddingStore {
            dim,
            normalized,
            ids: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        };
        for (id, vector) in entries {
            let id = id.into();
            if vector.len() != dim {
                return Err(StoreError::InvariantViolation(format!(
                    "vector for {id:?} has {} components, expected {dim}",
                    vector.len()
                )));
            }
            if id.len() > u16::MAX as usize {
                return Err(StoreError::InvariantViolation(format!(
                    "id of {} bytes exceeds the u16 length field",
                    id.len()
                )));
            }
            if let Some(bad) = vector.iter().position(|x| !x.is_finite()) {
                return Err(StoreError::InvariantViolation(format!(
                    "vector for {id:?} has a non-finite component at {bad}"
                )));
            }
            if normalized {
                let norm = l2_norm(&vector);
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(StoreError::InvariantViolation(format!(
                        "store flagged normalized but {id:?} has norm {norm}"
                    )));
                }
            }
            store.push(id, &vector)?;
        }
        Ok(store)
    }

    fn push(&mut self, id: String, vector: &[f32]) -> Result<()> {
        if self.index.contains_key(&id) {
            return Err(StoreError::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Returns the stored vector; a missing id is always an error.
    pub fn get(&self, id: &str) -> Result<&[f32]> {
        match self.index.get(id) {
            Some(&i) => Ok(self.vector_at(i)),
            None => Err(StoreError::UnknownId(id.to_string())),
        }
    }

    pub fn try_get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.vector_at(i))
    }

    pub fn vector_at(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn id_at(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Entries in file order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[f32])> + '_ {
        self.ids
            .iter()
            .enumerate()
            .map(move |(i, id)| (id.as_str(), self.vector_at(i)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let index_len: usize = self.ids.iter().map(|id| 2 + id.len() + 8).sum();
        let payload_start = FIXED_HEADER_LEN + index_len;
        let row_bytes = self.dim * 4;
        let mut buf = Vec::with_capacity(payload_start + self.data.len() * 4);

        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let flags = if self.normalized { FLAG_NORMALIZED } else { 0 };
        buf.extend_from_slice(&flags.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (i, id) in self.ids.iter().enumerate() {
            buf.extend_from_slice(&(id.len() as u16).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
            let offset = (payload_start + i * row_bytes) as u64;
            buf.extend_from_slice(&offset.to_le_bytes());
        }
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FIXED_HEADER_LEN {
            return Err(StoreError::MalformedHeader(format!(
                "file has {} bytes, header needs {FIXED_HEADER_LEN}",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(StoreError::MalformedHeader(format!(
                "bad magic {:?}",
                &bytes[0..4]
            )));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(StoreError::MalformedHeader(format!(
                "unsupported format version {version}"
            )));
        }
        let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
        if flags & !FLAG_NORMALIZED != 0 {
            return Err(StoreError::MalformedHeader(format!(
                "unknown flag bits {flags:#06x}"
            )));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(StoreError::MalformedHeader("dimension is zero".into()));
        }
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());

        let mut cursor = Cursor {
            bytes,
            pos: FIXED_HEADER_LEN,
        };
        let mut index = Vec::new();
        for i in 0..count {
            let id_len = cursor.u16()? as usize;
            let id = std::str::from_utf8(cursor.take(id_len)?)
                .map_err(|e| StoreError::MalformedHeader(format!("id #{i} is not UTF-8: {e}")))?
                .to_string();
            let offset = cursor.u64()?;
            index.push((id, offset));
        }
        let payload_start = cursor.pos;
        let row_bytes = dim * 4;
        let payload_len = bytes.len() - payload_start;
        let expected = (count as u128) * (row_bytes as u128);
        if payload_len as u128 != expected {
            return Err(StoreError::DimensionMismatch(format!(
                "{count} vectors of dim {dim} need {expected} payload bytes, found {payload_len}"
            )));
        }

        let mut store = EmbeddingStore {
            dim,
            normalized: flags & FLAG_NORMALIZED != 0,
            ids: Vec::with_capacity(index.len()),
            data: Vec::with_capacity(index.len() * dim),
            index: HashMap::with_capacity(index.len()),
        };
        let mut row = Vec::with_capacity(dim);
        for (id, offset) in index {
            let start = usize::try_from(offset)
                .ok()
                .filter(|&o| o >= payload_start && o.saturating_add(row_bytes) <= bytes.len())
                .ok_or_else(|| {
                    StoreError::DimensionMismatch(format!(
                        "payload offset {offset} for {id:?} lies outside the payload section"
                    ))
                })?;
            row.clear();
            row.extend(
                bytes[start..start + row_bytes]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
            );
            store.push(id, &row)?;
        }
        Ok(store)
    }

    /// Writes the store atomically (temp file in the same directory, then rename).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = tmp_sibling(path);
        fs::write(&tmp, self.to_bytes()).map_err(|e| StoreError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(StoreError::MalformedHeader(format!(
                "index section truncated at byte {}",
                self.pos
            ))),
        }
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

pub fn open_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| StoreError::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes)
}

pub fn write_store<I, S>(
    path: impl AsRef<Path>,
    dim: usize,
    entries: I,
    normalized: bool,
) -> Result<()>
where
    I: IntoIterator<Item = (S, Vec<f32>)>,
    S: Into<String>,
{
    EmbeddingStore::new(dim, entries, normalized)?.write(path)
}

/// One image–caption pair to be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PairRecord {
    pub pair_id: String,
    pub image_id: String,
    pub caption_id: String,
    pub caption_text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairManifest {
    pub records: Vec<PairRecord>,
}

impl PairManifest {
    pub fn new(records: Vec<PairRecord>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if !seen.insert(r.pair_id.as_str()) {
                return Err(StoreError::DuplicateId(r.pair_id.clone()));
            }
        }
        Ok(PairManifest { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Parses one JSON object per line; blank lines are skipped.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| StoreError::MalformedManifest {
                line: n + 1,
                detail: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PairRecord =
                serde_json::from_str(&line).map_err(|e| StoreError::MalformedManifest {
                    line: n + 1,
                    detail: e.to_string(),
                })?;
            records.push(rec);
        }
        PairManifest::new(records)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| StoreError::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = fs::File::create(path).map_err(|e| StoreError::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| StoreError::io(path, e))
    }
}
