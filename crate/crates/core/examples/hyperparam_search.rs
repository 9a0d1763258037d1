//! Grid search over head width, depth and learning rate on the toy corpus.
//! Trials run in parallel; the ranking does not depend on thread count.
//!
//!     cargo run --release --example hyperparam_search

use mgt_detect::corpus::train_val_split;
use mgt_detect::pipeline::{
    hyperparam_search, variant_spec, Overrides, Preset, SearchSpace, Strategy, TrainConfig, VariantName,
};
use mgt_detect::synthetic::toy_corpus;

fn main() -> mgt_detect::Result<()> {
    let seed = 5;
    let (tr, va) = train_val_split(&toy_corpus(400, seed), 0.8, seed);
    let spec = variant_spec(VariantName::GruFrozen, Preset::Desk, &Overrides::default())?;
    let cfg = TrainConfig {
        epochs: 4,
        seed,
        ..TrainConfig::default()
    };
    let space = SearchSpace::neighborhood(&spec, &cfg);
    let result = hyperparam_search(&spec, &tr, &va, &space, Strategy::Grid, &cfg)?;
    println!("rank  hidden  layers  lr       val_acc  params  best_epoch");
    for (i, t) in result.ranked.iter().enumerate() {
        let c = &t.config;
        println!(
            "{:>4}  {:>6}  {:>6}  {:<7.0e}  {:>7.4}  {:>6}  {:>10}",
            i + 1,
            c.hidden,
            c.layers,
            c.lr,
            t.val_accuracy,
            t.trainable_params,
            t.best_epoch
        );
    }
    Ok(())
}
