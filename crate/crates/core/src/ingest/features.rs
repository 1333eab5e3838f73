//! CFV1 feature files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "CFV1" | u32 version = 1 | u32 dim | u64 count
//! count × ( u16 key_len | key bytes (UTF-8) | u32 variant | dim × f32 )
//! ```

use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::fsutil::{self, ByteReader};

pub const CFV1_MAGIC: [u8; 4] = *b"CFV1";
pub const CFV1_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// One embedding. Variant 0 is the canonical vector; variants 1.. hold
/// augmented versions (e.g. rotated images) extracted offline.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub key: String,
    pub variant: u32,
    pub vector: Vec<f32>,
}

/// All records of one feature file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    records: IndexMap<(String, u32), Vec<f32>>,
    variants: HashMap<String, Vec<u32>>,
}

impl FeatureSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: IndexMap::new(),
            variants: HashMap::new(),
        }
    }

    pub fn from_records(dim: usize, records: impl IntoIterator<Item = FeatureRecord>) -> Result<Self> {
        let mut set = Self::new(dim);
        for r in records {
            set.insert(r)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, record: FeatureRecord) -> Result<()> {
        if record.vector.len() != self.dim {
            return Err(Error::Dimension(format!(
                "record {:?}/{} has {} values, file dimension is {}",
                record.key,
                record.variant,
                record.vector.len(),
                self.dim
            )));
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature {:?} variant {}",
                record.key, record.variant
            )));
        }
        if record.key.len() > u16::MAX as usize {
            return Err(Error::validation(format!(
                "feature key of {} bytes exceeds the u16 length field",
                record.key.len()
            )));
        }
        let id = (record.key, record.variant);
        if self.records.contains_key(&id) {
            return Err(Error::DuplicateRecord {
                key: id.0,
                variant: id.1,
            });
        }
        let vars = self.variants.entry(id.0.clone()).or_default();
        let pos = vars.binary_search(&id.1).unwrap_err();
        vars.insert(pos, id.1);
        self.records.insert(id, record.vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str, variant: u32) -> Option<&[f32]> {
        self.records
            .get(&(key.to_string(), variant))
            .map(Vec::as_slice)
    }

    /// Variant ids present for `key`, ascending.
    pub fn variants_of(&self, key: &str) -> &[u32] {
        self.variants.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn key_count(&self) -> usize {
        self.variants.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, &[f32])> {
        self.records
            .iter()
            .map(|((k, v), vec)| (k.as_str(), *v, vec.as_slice()))
    }

    pub fn to_records(&self) -> Vec<FeatureRecord> {
        self.iter()
            .map(|(key, variant, vector)| FeatureRecord {
                key: key.to_string(),
                variant,
                vector: vector.to_vec(),
            })
            .collect()
    }
}

pub fn encode_features(dim: usize, records: &[FeatureRecord]) -> Result<Vec<u8>> {
    // validates dims, finiteness and uniqueness
    let set = FeatureSet::from_records(dim, records.iter().cloned())?;
    let dim_u32 = u32::try_from(dim)
        .map_err(|_| Error::validation(format!("dimension {dim} does not fit in u32")))?;
    let body: usize = records.iter().map(|r| 2 + r.key.len() + 4 + 4 * dim).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + body);
    out.extend_from_slice(&CFV1_MAGIC);
    out.extend_from_slice(&CFV1_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for (key, variant, vector) in set.iter() {
        out.extend_from_slice(&(key.len() as u16).to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        out.extend_from_slice(&variant.to_le_bytes());
        for v in vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSet> {
    let mut r = ByteReader::new(bytes);
    let magic: [u8; 4] = r.array("magic")?;
    if magic != CFV1_MAGIC {
        return Err(Error::BadMagic {
            expected: CFV1_MAGIC,
            found: magic,
        });
    }
    let version = r.u32("version")?;
    if version != CFV1_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = r.u32("dimension")? as usize;
    let count = r.u64("record count")?;
    let mut set = FeatureSet::new(dim);
    for i in 0..count {
        let key_len = r.u16("key length")? as usize;
        let key_bytes = r.take(key_len, "key")?;
        let key = std::str::from_utf8(key_bytes)
            .map_err(|e| {
                Error::validation(format!("record {i}: key is not UTF-8 ({e})"))
            })?
            .to_string();
        let variant = r.u32("variant")?;
        let raw = r.take(4 * dim, "vector")?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        set.insert(FeatureRecord {
            key,
            variant,
            vector,
        })?;
    }
    if r.remaining() != 0 {
        return Err(Error::validation(format!(
            "{} trailing bytes after {count} records (offset {})",
            r.remaining(),
            r.position()
        )));
    }
    Ok(set)
}

pub fn read_feature_file(path: &Path) -> Result<FeatureSet> {
    decode_features(&fsutil::read_bytes(path)?)
}

pub fn write_feature_file(path: &Path, dim: usize, records: &[FeatureRecord]) -> Result<()> {
    let bytes = encode_features(dim, records)?;
    fsutil::write_atomic(path, &bytes)
}
