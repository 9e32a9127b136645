//! Single-file model container: a safetensors file whose header metadata
//! carries the format version, model kind, configuration JSON and its hash,
//! plus the token vocabulary and category list the model was trained with.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::Tensor;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn;

pub const FORMAT: &str = "cyscolor-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub kind: String,
    pub config_json: String,
    pub vocab_json: String,
    pub categories: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl CheckpointMeta {
    pub fn config_hash(&self) -> String {
        sha256_hex(self.config_json.as_bytes())
    }

    pub fn vocab_hash(&self) -> String {
        sha256_hex(self.vocab_json.as_bytes())
    }
}

pub fn save(path: &Path, meta: &CheckpointMeta, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let mut header = HashMap::new();
    header.insert("format".to_string(), FORMAT.to_string());
    header.insert("version".to_string(), VERSION.to_string());
    header.insert("kind".to_string(), meta.kind.clone());
    header.insert("config".to_string(), meta.config_json.clone());
    header.insert("config_hash".to_string(), meta.config_hash());
    header.insert("vocab".to_string(), meta.vocab_json.clone());
    header.insert("vocab_hash".to_string(), meta.vocab_hash());
    header.insert("categories".to_string(), serde_json::to_string(&meta.categories)?);
    let data: Vec<(&String, &Tensor)> = tensors.iter().collect();
    safetensors::tensor::serialize_to_file(data, Some(header), path).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads a checkpoint of the given kind, verifying format, version and the
/// integrity of the stored configuration and vocabulary hashes.
pub fn load(path: &Path, kind: &str) -> Result<(CheckpointMeta, BTreeMap<String, Tensor>)> {
    let fail = |reason: String| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path)?;
    let (_, st_meta) =
        safetensors::SafeTensors::read_metadata(&bytes).map_err(|e| fail(e.to_string()))?;
    let header = st_meta
        .metadata()
        .clone()
        .ok_or_else(|| fail("missing header metadata".into()))?;
    let field = |k: &str| {
        header
            .get(k)
            .cloned()
            .ok_or_else(|| fail(format!("missing header field {k:?}")))
    };
    if field("format")? != FORMAT {
        return Err(fail("not a cyscolor checkpoint".into()));
    }
    let version = field("version")?;
    if version != VERSION.to_string() {
        return Err(fail(format!("unsupported version {version}, expected {VERSION}")));
    }
    let found_kind = field("kind")?;
    if found_kind != kind {
        return Err(fail(format!("holds a {found_kind} model, expected {kind}")));
    }
    let meta = CheckpointMeta {
        kind: found_kind,
        config_json: field("config")?,
        vocab_json: field("vocab")?,
        categories: serde_json::from_str(&field("categories")?)?,
    };
    if meta.config_hash() != field("config_hash")? {
        return Err(fail("configuration hash does not match stored configuration".into()));
    }
    if meta.vocab_hash() != field("vocab_hash")? {
        return Err(fail("vocabulary hash does not match stored vocabulary".into()));
    }
    let tensors = candle_core::safetensors::load_buffer(&bytes, &nn::device())?;
    Ok((meta, tensors.into_iter().collect()))
}

/// Rejects a checkpoint whose configuration differs from `expected_json`.
pub fn ensure_config(path: &Path, meta: &CheckpointMeta, expected_json: &str) -> Result<()> {
    if meta.config_hash() != sha256_hex(expected_json.as_bytes()) {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: "configuration hash mismatch".into(),
        });
    }
    Ok(())
}
