//! Train two variants briefly and print the comparison table and its JSON form.
//!
//!     cargo run --release --example evaluate_report

use mgt_detect::corpus::train_val_split;
use mgt_detect::eval::{report, Format, ReportRow};
use mgt_detect::pipeline::{
    evaluate_records, train, variant_spec, Model, Overrides, Preset, TrainConfig, VariantName,
};
use mgt_detect::synthetic::toy_corpus;

fn main() -> mgt_detect::Result<()> {
    let seed = 21;
    let (tr, va) = train_val_split(&toy_corpus(400, seed), 0.8, seed);
    let cfg = TrainConfig {
        epochs: 3,
        seed,
        ..TrainConfig::default()
    };
    let mut rows = Vec::new();
    for name in [VariantName::BilstmFrozen, VariantName::GruFrozen] {
        let spec = variant_spec(name, Preset::Desk, &Overrides::default())?;
        let model = train(Model::for_training(spec, &tr, seed)?, &tr, &va, &cfg)?;
        let (_, metrics) = evaluate_records(&model, &va)?;
        rows.push(ReportRow {
            model: name.as_str().to_string(),
            metrics,
            trainable_params: model.audit().total,
        });
    }
    print!("{}", report(&rows, Format::Table));
    print!("{}", report(&rows, Format::Json));
    Ok(())
}
