//! Binary container shared by checkpoints and embedding files:
//! `b"MGTD"`, format version (u32 LE), manifest length (u64 LE), JSON
//! manifest, then a little-endian f32 blob.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::numerics::{Module, Tensor};

use super::model::Model;
use super::train::TrainingMeta;
use super::variant::VariantSpec;

pub const MAGIC: &[u8; 4] = b"MGTD";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8;

pub(crate) fn write_container<M: Serialize>(manifest: &M, blob: &[f32]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(manifest)?;
    let mut out = Vec::with_capacity(HEADER_LEN + json.len() + 4 * blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in blob {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses the header and manifest; returns the manifest and the raw blob.
pub(crate) fn read_container<M: DeserializeOwned>(bytes: &[u8]) -> Result<(M, &[u8])> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("missing MGTD header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let end = HEADER_LEN
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Corrupt(format!("manifest length {len} exceeds file size")))?;
    let manifest = serde_json::from_slice(&bytes[HEADER_LEN..end])
        .map_err(|e| Error::Corrupt(format!("manifest is not valid: {e}")))?;
    Ok((manifest, &bytes[end..]))
}

pub(crate) fn blob_floats(blob: &[u8], expected_bytes: u64) -> Result<Vec<f32>> {
    if blob.len() as u64 != expected_bytes || !blob.len().is_multiple_of(4) {
        return Err(Error::Corrupt(format!(
            "blob has {} bytes, manifest expects {expected_bytes}",
            blob.len()
        )));
    }
    Ok(blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Location of one parameter in the blob. `offset` is in bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub frozen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: String,
    pub spec: VariantSpec,
    pub seed: u64,
    pub max_len: usize,
    /// Absent encoder: the head reads precomputed embeddings of this width.
    pub external_input_dim: Option<usize>,
    pub vocab: Vec<String>,
    pub tensors: Vec<TensorEntry>,
    pub blob_bytes: u64,
    pub training: Option<TrainingMeta>,
}

const CHECKPOINT_KIND: &str = "checkpoint";

pub fn checkpoint_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut blob: Vec<f32> = Vec::new();
    model.visit(&mut |p| {
        tensors.push(TensorEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset: 4 * blob.len() as u64,
            frozen: p.frozen,
        });
        blob.extend_from_slice(p.value.data());
    });
    let manifest = CheckpointManifest {
        kind: CHECKPOINT_KIND.into(),
        spec: model.spec.clone(),
        seed: model.seed,
        max_len: model.max_len,
        external_input_dim: model.encoder.is_none().then(|| model.input_dim()),
        vocab: model.vocab.tokens().to_vec(),
        tensors,
        blob_bytes: 4 * blob.len() as u64,
        training: model.training.clone(),
    };
    write_container(&manifest, &blob)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Model> {
    let (manifest, blob): (CheckpointManifest, _) = read_container(bytes)?;
    if manifest.kind != CHECKPOINT_KIND {
        return Err(Error::Corrupt(format!(
            "expected a checkpoint, found `{}`",
            manifest.kind
        )));
    }
    let floats = blob_floats(blob, manifest.blob_bytes)?;
    let mut by_name: BTreeMap<&str, &TensorEntry> = BTreeMap::new();
    for t in &manifest.tensors {
        if by_name.insert(&t.name, t).is_some() {
            return Err(Error::Corrupt(format!("tensor `{}` listed twice", t.name)));
        }
    }
    let vocab = Vocab::from_tokens(manifest.vocab.clone())?;
    let mut model = match manifest.external_input_dim {
        Some(d) => Model::head_only(manifest.spec.clone(), d, manifest.seed)?,
        None => Model::new(manifest.spec.clone(), vocab, manifest.seed)?,
    };
    model.max_len = manifest.max_len;
    model.training = manifest.training.clone();
    let mut problem: Option<String> = None;
    let mut seen = 0;
    model.visit_mut(&mut |p| {
        if problem.is_some() {
            return;
        }
        let Some(entry) = by_name.get(p.name.as_str()) else {
            problem = Some(format!("tensor `{}` missing", p.name));
            return;
        };
        if entry.shape != p.value.shape() {
            problem = Some(format!(
                "tensor `{}` has shape {:?}, model expects {:?}",
                p.name,
                entry.shape,
                p.value.shape()
            ));
            return;
        }
        let start = (entry.offset / 4) as usize;
        let n = p.numel();
        if entry.offset % 4 != 0 || start + n > floats.len() {
            problem = Some(format!("tensor `{}` lies outside the blob", p.name));
            return;
        }
        p.value = Tensor::from_vec(entry.shape.as_slice(), floats[start..start + n].to_vec()).expect("shape checked");
        p.frozen = entry.frozen;
        seen += 1;
    });
    if let Some(msg) = problem {
        return Err(Error::Corrupt(msg));
    }
    if seen != manifest.tensors.len() {
        return Err(Error::Corrupt(format!(
            "manifest lists {} tensors, model has {seen}",
            manifest.tensors.len()
        )));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &checkpoint_bytes(model)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    checkpoint_from_bytes(&read_file(path.as_ref())?)
}
