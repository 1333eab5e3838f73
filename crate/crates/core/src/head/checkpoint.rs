//! CKP1 checkpoints.
//!
//! ```text
//! "CKP1" | u32 version = 1 | u32 metadata_len | metadata JSON
//! | every parameter tensor as f32 LE, in GatedHeadParams declaration order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{self, ByteReader};

use super::params::{GatedHeadParams, HeadArch};

pub const CKP1_MAGIC: [u8; 4] = *b"CKP1";
pub const CKP1_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub arch: HeadArch,
    pub vocab_hash: String,
    pub type_names: Vec<String>,
    pub seed: u64,
    pub dropout_rate: f64,
    pub epochs_trained: usize,
    /// Epoch whose parameters were kept when validation tracking was on.
    #[serde(default)]
    pub best_epoch: Option<usize>,
}

/// Parameters plus metadata. Parameters are held at f32 precision so the
/// in-memory value is exactly what the file stores.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: GatedHeadParams,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta, mut params: GatedHeadParams) -> Result<Self> {
        if meta.arch != params.arch {
            return Err(Error::Dimension(
                "checkpoint metadata and parameter architecture differ".into(),
            ));
        }
        if meta.type_names.len() != params.arch.num_types {
            return Err(Error::Dimension(format!(
                "{} type names for {} type outputs",
                meta.type_names.len(),
                params.arch.num_types
            )));
        }
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(Self { meta, params })
    }

    pub fn encode(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        let mut out = Vec::with_capacity(12 + meta.len() + 4 * self.params.num_scalars());
        out.extend_from_slice(&CKP1_MAGIC);
        out.extend_from_slice(&CKP1_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        for t in self.params.tensors() {
            for &v in t {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic: [u8; 4] = r.array("magic")?;
        if magic != CKP1_MAGIC {
            return Err(Error::BadMagic {
                expected: CKP1_MAGIC,
                found: magic,
            });
        }
        let version = r.u32("version")?;
        if version != CKP1_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let len = r.u32("metadata length")? as usize;
        let meta_bytes = r.take(len, "metadata")?;
        let meta_text = std::str::from_utf8(meta_bytes)
            .map_err(|e| Error::validation(format!("checkpoint metadata is not UTF-8: {e}")))?;
        let meta: CheckpointMeta =
            serde_json::from_str(meta_text).map_err(|e| Error::json(e, meta_text))?;
        let mut params = GatedHeadParams::zeros(&meta.arch)?;
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v = r.f32("parameters")? as f64;
            }
        }
        if r.remaining() != 0 {
            return Err(Error::validation(format!(
                "{} trailing bytes after checkpoint parameters",
                r.remaining()
            )));
        }
        Self::new(meta, params)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fsutil::read_bytes(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.encode())
    }
}
