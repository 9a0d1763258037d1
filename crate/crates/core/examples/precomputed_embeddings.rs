//! Run the frozen encoder once, keep its hidden states, and train a GRU head
//! on them without touching the encoder again.
//!
//!     cargo run --release --example precomputed_embeddings

use mgt_detect::corpus::train_val_split;
use mgt_detect::pipeline::{
    embed_records, evaluate_examples, train_examples, variant_spec, Model, Overrides, Preset, TrainConfig,
    VariantName,
};
use mgt_detect::synthetic::toy_corpus;

fn main() -> mgt_detect::Result<()> {
    let seed = 9;
    let (tr, va) = train_val_split(&toy_corpus(600, seed), 0.8, seed);
    let spec = variant_spec(VariantName::GruFrozen, Preset::Desk, &Overrides::default())?;
    let encoder = Model::for_training(spec.clone(), &tr, seed)?;

    let start = std::time::Instant::now();
    let tr_set = embed_records(&encoder, &tr)?;
    let va_set = embed_records(&encoder, &va)?;
    println!(
        "embedded {} + {} records (dim {}) in {:.2}s",
        tr_set.records.len(),
        va_set.records.len(),
        tr_set.model_dim,
        start.elapsed().as_secs_f64()
    );

    let head = Model::head_only(spec, tr_set.model_dim, seed)?;
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let trained = train_examples(head, &tr_set.examples(), &va_set.examples(), &cfg)?;
    let (loss, preds) = evaluate_examples(&trained, &va_set.examples())?;
    let correct = preds.iter().zip(&va).filter(|(p, r)| p.label == r.label).count();
    println!(
        "head trained in {:.2}s: val loss {loss:.4}, accuracy {:.4}",
        start.elapsed().as_secs_f64(),
        correct as f64 / va.len() as f64
    );
    Ok(())
}
