//! Train the frozen-encoder BiLSTM detector on the generated toy corpus and
//! print the per-epoch history.
//!
//!     cargo run --release --example train_toy -- [seed]

use mgt_detect::corpus::train_val_split;
use mgt_detect::pipeline::{train, variant_spec, Model, Overrides, Preset, TrainConfig, VariantName};
use mgt_detect::synthetic::toy_corpus;

fn main() -> mgt_detect::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let records = toy_corpus(2000, seed);
    let (tr, va) = train_val_split(&records, 0.8, seed);
    let spec = variant_spec(VariantName::BilstmFrozen, Preset::Desk, &Overrides::default())?;
    let model = Model::for_training(spec, &tr, seed)?;
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let trained = train(model, &tr, &va, &cfg)?;
    let meta = trained.training.as_ref().expect("history");
    println!("epoch  train_loss  val_loss  val_acc");
    for e in &meta.history {
        println!("{:>5}  {:>10.4}  {:>8.4}  {:>7.4}", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
    }
    println!("best epoch {} ({:.1}s)", meta.best_epoch, start.elapsed().as_secs_f64());
    Ok(())
}
