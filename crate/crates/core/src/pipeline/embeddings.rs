//! Precomputed encoder outputs, stored in the checkpoint container so an
//! external encoder can stand in for the built-in one.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Record};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::checkpoint::{blob_floats, read_container, read_file, write_container, write_file};
use super::model::Model;
use super::train::{Example, Input};

/// Hidden states `[rows × model_dim]` and mask for one record.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub label: Label,
    pub hidden: Tensor<f32>,
    pub mask: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub model_dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Serialize, Deserialize)]
struct EntryManifest {
    id: String,
    label: Label,
    rows: usize,
    mask: Vec<u8>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingManifest {
    kind: String,
    model_dim: usize,
    blob_bytes: u64,
    records: Vec<EntryManifest>,
}

const EMBEDDINGS_KIND: &str = "embeddings";

/// Runs `model`'s encoder over every record.
pub fn embed_records(model: &Model, records: &[Record]) -> Result<EmbeddingSet> {
    let out: Vec<EmbeddingRecord> = records
        .par_iter()
        .map(|r| {
            let seq = model.tokenize(&r.text);
            Ok(EmbeddingRecord {
                id: r.id.clone(),
                label: r.label,
                hidden: model.hidden(&seq)?,
                mask: seq.attention_mask,
            })
        })
        .collect::<Result<_>>()?;
    let model_dim = model
        .encoder
        .as_ref()
        .map(|e| e.config.model_dim)
        .ok_or_else(|| Error::Input("model has no encoder to embed with".into()))?;
    Ok(EmbeddingSet {
        model_dim,
        records: out,
    })
}

impl EmbeddingSet {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut blob = Vec::new();
        let mut entries = Vec::with_capacity(self.records.len());
        for r in &self.records {
            if r.hidden.cols() != self.model_dim || r.hidden.rows() != r.mask.len() {
                return Err(Error::Shape {
                    op: "embedding_record",
                    left: r.hidden.shape().to_vec(),
                    right: vec![r.mask.len(), self.model_dim],
                });
            }
            entries.push(EntryManifest {
                id: r.id.clone(),
                label: r.label,
                rows: r.hidden.rows(),
                mask: r.mask.clone(),
                offset: 4 * blob.len() as u64,
            });
            blob.extend_from_slice(r.hidden.data());
        }
        let manifest = EmbeddingManifest {
            kind: EMBEDDINGS_KIND.into(),
            model_dim: self.model_dim,
            blob_bytes: 4 * blob.len() as u64,
            records: entries,
        };
        write_container(&manifest, &blob)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (manifest, blob): (EmbeddingManifest, _) = read_container(bytes)?;
        if manifest.kind != EMBEDDINGS_KIND {
            return Err(Error::Corrupt(format!(
                "expected an embeddings file, found `{}`",
                manifest.kind
            )));
        }
        let floats = blob_floats(blob, manifest.blob_bytes)?;
        let d = manifest.model_dim;
        let records = manifest
            .records
            .into_iter()
            .map(|e| {
                let start = (e.offset / 4) as usize;
                let n = e.rows * d;
                if e.mask.len() != e.rows || e.offset % 4 != 0 || start + n > floats.len() {
                    return Err(Error::Corrupt(format!("record `{}` does not fit the blob", e.id)));
                }
                Ok(EmbeddingRecord {
                    id: e.id,
                    label: e.label,
                    hidden: Tensor::from_vec(&[e.rows, d], floats[start..start + n].to_vec())?,
                    mask: e.mask,
                })
            })
            .collect::<Result<_>>()?;
        Ok(EmbeddingSet { model_dim: d, records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path.as_ref())?)
    }

    pub fn examples(&self) -> Vec<Example> {
        self.records
            .iter()
            .map(|r| Example {
                input: Input::Hidden {
                    hidden: r.hidden.clone(),
                    mask: r.mask.clone(),
                },
                label: r.label,
            })
            .collect()
    }
}
