//! Variant assembly, training, hyperparameter search and checkpoint I/O.

mod checkpoint;
mod embeddings;
mod model;
mod search;
mod train;
mod variant;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CheckpointManifest,
    TensorEntry, FORMAT_VERSION, MAGIC,
};
pub use embeddings::{embed_records, EmbeddingRecord, EmbeddingSet};
pub use model::{Model, Prediction};
pub use search::{
    hyperparam_search, trial_configs, SearchResult, SearchSpace, Strategy, Trial, TrialConfig,
};
pub use train::{
    encoder_trains, evaluate_examples, metrics_for, prepare, train, train_examples, EpochRecord,
    Example, Input, TrainConfig, TrainingMeta,
};
pub use variant::{render_audit, variant_spec, Overrides, ParamAudit, Preset, VariantName, VariantSpec};

use crate::corpus::{Label, Record};
use crate::error::Result;
use crate::eval::{evaluate, Metrics};

/// Predictions and metrics for labeled records.
pub fn evaluate_records(model: &Model, records: &[Record]) -> Result<(Vec<Prediction>, Metrics)> {
    let texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
    let preds = model.predict(&texts)?;
    let predicted: Vec<Label> = preds.iter().map(|p| p.label).collect();
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    let m = evaluate(&predicted, &labels)?;
    Ok((preds, m))
}
