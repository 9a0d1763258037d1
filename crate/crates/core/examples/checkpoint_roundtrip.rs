//! Save and reload a briefly trained LoRA model, then confirm the bytes and
//! the predictions survive the trip.
//!
//!     cargo run --release --example checkpoint_roundtrip

use mgt_detect::corpus::train_val_split;
use mgt_detect::pipeline::{
    load_checkpoint, save_checkpoint, train, variant_spec, Model, Overrides, Preset, TrainConfig, VariantName,
};
use mgt_detect::synthetic::toy_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (tr, va) = train_val_split(&toy_corpus(200, 3), 0.8, 3);
    let spec = variant_spec(VariantName::LoraFrozen, Preset::Desk, &Overrides::default())?;
    let cfg = TrainConfig {
        epochs: 2,
        lr: 3e-3,
        ..TrainConfig::default()
    };
    let model = train(Model::for_training(spec, &tr, 3)?, &tr, &va, &cfg)?;

    let dir = tempfile::tempdir()?;
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    save_checkpoint(&model, &a)?;
    let loaded = load_checkpoint(&a)?;
    save_checkpoint(&loaded, &b)?;
    let same_bytes = std::fs::read(&a)? == std::fs::read(&b)?;

    let texts: Vec<String> = va.iter().map(|r| r.text.clone()).collect();
    let before = model.predict(&texts)?;
    let after = loaded.predict(&texts)?;
    let same_preds = before
        .iter()
        .zip(&after)
        .all(|(x, y)| x.prob_machine.to_bits() == y.prob_machine.to_bits());
    println!("{} bytes, identical re-save: {same_bytes}", std::fs::metadata(&a)?.len());
    println!("{} predictions, bit-identical: {same_preds}", before.len());
    Ok(())
}
