use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{shuffled_order, Label, Record, TokenSeq};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics};
use crate::heads::DropoutCtx;
use crate::numerics::{softmax_ce, zero_grads, Adam, AdamConfig, Tensor};
use crate::rng::{derive_index, derive_seed, DEFAULT_SEED};

use super::model::{Model, Prediction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Head and adapter learning rate.
    pub lr: f64,
    /// Learning rate for unfrozen encoder weights.
    pub backbone_lr: f64,
    /// Stop after this many epochs without a new best validation accuracy.
    pub patience: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            lr: 1e-3,
            backbone_lr: 2e-5,
            patience: 3,
            max_len: 256,
            seed: DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        for (name, v) in [("lr", self.lr), ("backbone_lr", self.backbone_lr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if self.max_len < 3 {
            return Err(Error::Config("max_len must be at least 3".into()));
        }
        Ok(())
    }
}

/// One line of training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_f1_macro: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// What a training example feeds the model.
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Tokens(TokenSeq),
    /// Encoder output computed ahead of time, `[T × d]`.
    Hidden { hidden: Tensor<f32>, mask: Vec<u8> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: Input,
    pub label: Label,
}

/// Tokenizes `records`; with `precompute`, also runs the encoder once so
/// later epochs only touch the head.
pub fn prepare(model: &Model, records: &[Record], precompute: bool) -> Result<Vec<Example>> {
    records
        .par_iter()
        .map(|r| {
            let seq = model.tokenize(&r.text);
            let input = if precompute {
                Input::Hidden {
                    hidden: model.hidden(&seq)?,
                    mask: seq.attention_mask,
                }
            } else {
                Input::Tokens(seq)
            };
            Ok(Example { input, label: r.label })
        })
        .collect()
}

fn check_data(train: &[Example], val: &[Example]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let first = train[0].label;
    if train.iter().all(|e| e.label == first) {
        return Err(Error::Input(format!(
            "training set has only {} examples; both classes are required",
            first.name()
        )));
    }
    if val.is_empty() {
        return Err(Error::Input("validation set is empty".into()));
    }
    Ok(())
}

/// Whether the encoder needs to run during training.
pub fn encoder_trains(model: &Model) -> bool {
    model.encoder.as_ref().is_some_and(|e| e.has_trainable())
}

/// Trains `model` on raw records. Frozen encoders are run once up front.
pub fn train(mut model: Model, train: &[Record], val: &[Record], cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    if model.encoder.is_none() {
        return Err(Error::Input(
            "model has no encoder; train it on precomputed embeddings instead".into(),
        ));
    }
    model.max_len = cfg.max_len;
    let precompute = !encoder_trains(&model);
    let tr = prepare(&model, train, precompute)?;
    let va = prepare(&model, val, precompute)?;
    train_examples(model, &tr, &va, cfg)
}

/// Logits, loss and (when `scale` is given) accumulated gradients for one
/// example.
fn example_step(model: &mut Model, ex: &Example, ctx: DropoutCtx, scale: f32) -> Result<f64> {
    let label = [ex.label.as_index()];
    match &ex.input {
        Input::Hidden { hidden, mask } => {
            let (logits, cache) = model.head.forward(hidden, mask, ctx)?;
            let (loss, mut dl) = softmax_ce(&logits, &label)?;
            dl.data_mut().iter_mut().for_each(|v| *v *= scale);
            model.head.backward(&cache, &dl);
            Ok(loss as f64)
        }
        Input::Tokens(seq) => {
            let Model { encoder, head, .. } = model;
            let encoder = encoder.as_mut().expect("token input needs an encoder");
            let (h, ecache) = encoder.forward(&seq.ids, &seq.attention_mask)?;
            let (logits, hcache) = head.forward(&h, &seq.attention_mask, ctx)?;
            let (loss, mut dl) = softmax_ce(&logits, &label)?;
            dl.data_mut().iter_mut().for_each(|v| *v *= scale);
            let dh = head.backward(&hcache, &dl);
            encoder.backward(&ecache, &dh);
            Ok(loss as f64)
        }
    }
}

/// Mean cross-entropy and predictions over `examples`, dropout off.
pub fn evaluate_examples(model: &Model, examples: &[Example]) -> Result<(f64, Vec<Prediction>)> {
    let out: Vec<(f64, Prediction)> = examples
        .par_iter()
        .map(|ex| {
            let logits = match &ex.input {
                Input::Hidden { hidden, mask } => model.logits_from_hidden(hidden, mask)?,
                Input::Tokens(seq) => model.logits(seq)?,
            };
            let p = Prediction::from_logits(logits.data());
            let prob_true = if ex.label == Label::Machine { p.prob_machine } else { 1.0 - p.prob_machine };
            Ok((-prob_true.max(f64::MIN_POSITIVE).ln(), p))
        })
        .collect::<Result<_>>()?;
    let loss = out.iter().map(|(l, _)| l).sum::<f64>() / out.len().max(1) as f64;
    Ok((loss, out.into_iter().map(|(_, p)| p).collect()))
}

pub fn metrics_for(model: &Model, examples: &[Example]) -> Result<(f64, Metrics)> {
    let (loss, preds) = evaluate_examples(model, examples)?;
    let predicted: Vec<Label> = preds.iter().map(|p| p.label).collect();
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    Ok((loss, evaluate(&predicted, &labels)?))
}

/// Mini-batch Adam with early stopping on validation accuracy. The returned
/// model holds the parameters of the best epoch and its training history.
pub fn train_examples(mut model: Model, train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    check_data(train, val)?;
    let needs_encoder = train.iter().chain(val).any(|e| matches!(e.input, Input::Tokens(_)));
    if needs_encoder && model.encoder.is_none() {
        return Err(Error::Input("token inputs given to a model without an encoder".into()));
    }
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        backbone_lr: cfg.backbone_lr,
        ..AdamConfig::default()
    });
    let shuffle_seed = derive_seed(cfg.seed, "shuffle");
    let dropout_seed = derive_seed(cfg.seed, "dropout");
    let mut step: u64 = 0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let order = shuffled_order(train.len(), derive_index(shuffle_seed, epoch as u64));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            zero_grads(&mut model);
            let scale = 1.0 / chunk.len() as f32;
            for &i in chunk {
                let ctx = DropoutCtx {
                    training: true,
                    seed: derive_index(dropout_seed, step),
                };
                step += 1;
                total += example_step(&mut model, &train[i], ctx, scale)?;
            }
            adam.step(&mut model);
        }
        let (val_loss, m) = metrics_for(&model, val)?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: total / train.len() as f64,
            val_loss,
            val_accuracy: m.accuracy,
            val_f1_macro: m.f1_macro,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| m.accuracy > *acc) {
            let mut snapshot = model.clone();
            zero_grads(&mut snapshot);
            best = Some((m.accuracy, epoch + 1, snapshot));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = epoch + 1 < cfg.epochs;
                break;
            }
        }
    }
    let (_, best_epoch, mut out) = best.expect("at least one epoch ran");
    out.training = Some(TrainingMeta {
        config: cfg.clone(),
        history,
        best_epoch,
        stopped_early,
    });
    Ok(out)
}
