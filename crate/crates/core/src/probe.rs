//! Language-model loss probe: train one causal LM on human sentences and
//! one on machine sentences, score held-out sentences of both classes, and
//! compare the four per-sentence loss distributions.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocab, encode, shuffled_order, Label, Record, Vocab};
use crate::encoder::{cast_linear, cast_param, Encoder, EncoderCache, EncoderConfig};
use crate::error::{Error, Result};
use crate::heads::{cell_step, cell_step_backward, CellKind, CellState, RecurrentCellParams, StepCache};
use crate::layers::Linear;
use crate::numerics::kernels::add_into;
use crate::numerics::{softmax_ce, zero_grads, Adam, AdamConfig, Module, ParamGroup, Parameter, Real, Tensor};
use crate::rng::{self, derive_index, derive_seed, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmKind {
    /// Unidirectional LSTM.
    LstmLm,
    /// Transformer encoder with a causal mask.
    TransformerLm,
}

impl LmKind {
    pub const ALL: [LmKind; 2] = [LmKind::LstmLm, LmKind::TransformerLm];

    pub fn as_str(self) -> &'static str {
        match self {
            LmKind::LstmLm => "lstm_lm",
            LmKind::TransformerLm => "transformer_lm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub kind: LmKind,
    pub model_dim: usize,
    pub layers: usize,
    /// Attention heads (transformer only).
    pub heads: usize,
    /// Feed-forward width (transformer only).
    pub ffn_dim: usize,
    /// Cap on the vocabulary built from the training sentences.
    pub max_vocab: usize,
    pub max_len: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl LmConfig {
    pub fn new(kind: LmKind) -> Self {
        LmConfig {
            kind,
            model_dim: 32,
            layers: 1,
            heads: 4,
            ffn_dim: 64,
            max_vocab: 1000,
            max_len: 64,
            epochs: 5,
            batch_size: 16,
            lr: 5e-3,
            seed: DEFAULT_SEED,
        }
    }

    fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            num_layers: self.layers,
            model_dim: self.model_dim,
            num_heads: self.heads,
            ffn_dim: self.ffn_dim,
            vocab_size,
            max_positions: self.max_len,
            attention_window: 0,
            causal: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_dim == 0 || self.layers == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("LM dimensions, epochs and batch size must be positive".into()));
        }
        if self.max_len < 3 {
            return Err(Error::Config("LM max_len must be at least 3".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("LM lr must be non-negative, got {}", self.lr)));
        }
        if self.kind == LmKind::TransformerLm {
            self.encoder_config(5).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum LmBody<T> {
    Lstm {
        embedding: Parameter<T>,
        layers: Vec<RecurrentCellParams<T>>,
    },
    Transformer(Encoder<T>),
}

/// Next-token language model: body plus a `[V × d]` output layer.
#[derive(Clone, Debug)]
pub struct LanguageModel<T = f32> {
    pub config: LmConfig,
    pub vocab_size: usize,
    pub body: LmBody<T>,
    pub output: Linear<T>,
}

#[derive(Clone, Debug)]
pub enum LmCache<T> {
    Lstm {
        ids: Vec<u32>,
        steps: Vec<Vec<StepCache<T>>>,
        hidden: Tensor<T>,
    },
    Transformer {
        cache: EncoderCache<T>,
        hidden: Tensor<T>,
    },
}

impl<T: Real> LanguageModel<T> {
    pub fn new(config: LmConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.model_dim;
        let mut r = rng::rng(seed);
        let body = match config.kind {
            LmKind::LstmLm => LmBody::Lstm {
                embedding: Parameter::new(
                    "lm.embedding",
                    Tensor::uniform(&[vocab_size, d], 1.0 / (d as f64).sqrt(), &mut r),
                    ParamGroup::Backbone,
                ),
                layers: (0..config.layers)
                    .map(|l| RecurrentCellParams::new(&format!("lm.lstm{l}"), CellKind::Lstm, d, d, &mut r))
                    .collect(),
            },
            LmKind::TransformerLm => {
                LmBody::Transformer(Encoder::new(config.encoder_config(vocab_size), derive_seed(seed, "body"))?)
            }
        };
        let output = Linear::new("lm.output", d, vocab_size, ParamGroup::Head, &mut r);
        Ok(LanguageModel {
            config,
            vocab_size,
            body,
            output,
        })
    }

    /// A model whose output layer is zero, so every prediction is uniform
    /// over the vocabulary.
    pub fn uniform(config: LmConfig, vocab_size: usize) -> Result<Self> {
        let mut lm = Self::new(config, vocab_size, 0)?;
        lm.output.weight.value.fill(T::zero());
        lm.output.bias.value.fill(T::zero());
        Ok(lm)
    }

    /// Logits `[n × V]` predicting `inputs[t + 1]` from `inputs[..=t]`.
    pub fn forward(&self, inputs: &[u32]) -> Result<(Tensor<T>, LmCache<T>)> {
        if let Some(&bad) = inputs.iter().find(|&&id| id as usize >= self.vocab_size) {
            return Err(Error::Input(format!("token id {bad} outside LM vocabulary")));
        }
        let d = self.config.model_dim;
        let (hidden, cache) = match &self.body {
            LmBody::Lstm { embedding, layers } => {
                let n = inputs.len();
                let mut x = Tensor::zeros(&[n, d]);
                for (t, &id) in inputs.iter().enumerate() {
                    x.row_mut(t).copy_from_slice(embedding.value.row(id as usize));
                }
                let mut steps = Vec::with_capacity(layers.len());
                for layer in layers {
                    let mut out = Tensor::zeros(&[n, d]);
                    let mut state = CellState::zeros(CellKind::Lstm, d);
                    let mut cs = Vec::with_capacity(n);
                    for t in 0..n {
                        let (s, c) = cell_step(layer, x.row(t), &state);
                        out.row_mut(t).copy_from_slice(&s.h);
                        cs.push(c);
                        state = s;
                    }
                    steps.push(cs);
                    x = out;
                }
                (
                    x.clone(),
                    LmCache::Lstm {
                        ids: inputs.to_vec(),
                        steps,
                        hidden: x,
                    },
                )
            }
            LmBody::Transformer(enc) => {
                let (h, cache) = enc.forward(inputs, &vec![1; inputs.len()])?;
                (h.clone(), LmCache::Transformer { cache, hidden: h })
            }
        };
        Ok((self.output.forward(&hidden), cache))
    }

    /// Accumulates gradients from `dlogits`.
    pub fn backward(&mut self, cache: &LmCache<T>, dlogits: &Tensor<T>) {
        let d = self.config.model_dim;
        match (cache, &mut self.body) {
            (LmCache::Lstm { ids, steps, hidden }, LmBody::Lstm { embedding, layers }) => {
                let mut dout = self.output.backward(hidden, dlogits, true).expect("dx");
                let n = ids.len();
                for l in (0..layers.len()).rev() {
                    let mut dx = Tensor::zeros(&[n, d]);
                    let mut dh_next = vec![T::zero(); d];
                    let mut dc_next = vec![T::zero(); d];
                    for t in (0..n).rev() {
                        let mut dh = dout.row(t).to_vec();
                        add_into(&mut dh, &dh_next);
                        let (dxt, dhp, dcp) = cell_step_backward(&mut layers[l], &steps[l][t], &dh, &dc_next);
                        dx.row_mut(t).copy_from_slice(&dxt);
                        dh_next = dhp;
                        dc_next = dcp;
                    }
                    dout = dx;
                }
                if let Some(g) = embedding.grad_mut() {
                    for (t, &id) in ids.iter().enumerate() {
                        add_into(&mut g[id as usize * d..(id as usize + 1) * d], dout.row(t));
                    }
                }
            }
            (LmCache::Transformer { cache, hidden }, LmBody::Transformer(enc)) => {
                let dh = self.output.backward(hidden, dlogits, true).expect("dx");
                enc.backward(cache, &dh);
            }
            _ => panic!("LM cache does not match model kind"),
        }
    }

    /// Mean next-token cross-entropy (in f64) over an encoded sentence
    /// `[CLS, tokens…, SEP]`.
    pub fn sentence_loss(&self, ids: &[u32]) -> Result<f64> {
        if ids.len() < 2 {
            return Err(Error::Input("need at least two ids to predict one".into()));
        }
        let (logits, _) = self.forward(&ids[..ids.len() - 1])?;
        let v = self.vocab_size;
        let mut total = 0.0;
        for (t, &target) in ids[1..].iter().enumerate() {
            let row = logits.row(t);
            let m = row.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x.f64() - m).exp()).sum::<f64>().ln();
            total += lse - row[target as usize].f64();
        }
        debug_assert_eq!(logits.cols(), v);
        Ok(total / (ids.len() - 1) as f64)
    }

    pub fn cast<U: Real>(&self) -> LanguageModel<U> {
        LanguageModel {
            config: self.config.clone(),
            vocab_size: self.vocab_size,
            body: match &self.body {
                LmBody::Lstm { embedding, layers } => LmBody::Lstm {
                    embedding: cast_param(embedding),
                    layers: layers.iter().map(|l| l.cast()).collect(),
                },
                LmBody::Transformer(e) => LmBody::Transformer(e.cast()),
            },
            output: cast_linear(&self.output),
        }
    }
}

impl<T: Real> Module<T> for LanguageModel<T> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        match &self.body {
            LmBody::Lstm { embedding, layers } => {
                f(embedding);
                for l in layers {
                    l.visit(f);
                }
            }
            LmBody::Transformer(e) => e.visit(f),
        }
        self.output.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        match &mut self.body {
            LmBody::Lstm { embedding, layers } => {
                f(embedding);
                for l in layers {
                    l.visit_mut(f);
                }
            }
            LmBody::Transformer(e) => e.visit_mut(f),
        }
        self.output.visit_mut(f);
    }
}

/// Encoded sentence ids, or `None` if it has fewer than two word tokens.
fn lm_ids(text: &str, vocab: &Vocab, max_len: usize) -> Option<Vec<u32>> {
    let seq = encode(text, vocab, max_len);
    (seq.ids.len() >= 4).then_some(seq.ids)
}

#[derive(Clone, Debug)]
pub struct TrainedLm {
    pub model: LanguageModel<f32>,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Sentences too short to train on.
    pub skipped: usize,
}

fn single_label(records: &[Record]) -> Result<Label> {
    let first = records
        .first()
        .ok_or_else(|| Error::Input("LM training set is empty".into()))?
        .label;
    if records.iter().any(|r| r.label != first) {
        return Err(Error::Input("LM training records must all share one label".into()));
    }
    Ok(first)
}

/// Teacher-forced next-token training with Adam. The initialization and
/// shuffling streams derive from `cfg.seed` and the LM kind only, so equal
/// data gives equal models regardless of class.
pub fn train_lm(records: &[Record], vocab: &Vocab, cfg: &LmConfig) -> Result<TrainedLm> {
    cfg.validate()?;
    single_label(records)?;
    let seqs: Vec<Vec<u32>> = records.iter().filter_map(|r| lm_ids(&r.text, vocab, cfg.max_len)).collect();
    let skipped = records.len() - seqs.len();
    if seqs.is_empty() {
        return Err(Error::Input("no sentence has at least two tokens".into()));
    }
    let root = derive_seed(cfg.seed, cfg.kind.as_str());
    let mut model = LanguageModel::<f32>::new(cfg.clone(), vocab.len(), derive_seed(root, "init"))?;
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        backbone_lr: cfg.lr,
        ..AdamConfig::default()
    });
    let shuffle = derive_seed(root, "shuffle");
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = shuffled_order(seqs.len(), derive_index(shuffle, epoch as u64));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            zero_grads(&mut model);
            let scale = 1.0 / chunk.len() as f32;
            for &i in chunk {
                let ids = &seqs[i];
                let targets: Vec<usize> = ids[1..].iter().map(|&t| t as usize).collect();
                let (logits, cache) = model.forward(&ids[..ids.len() - 1])?;
                let (loss, mut dl) = softmax_ce(&logits, &targets)?;
                dl.data_mut().iter_mut().for_each(|v| *v *= scale);
                model.backward(&cache, &dl);
                total += loss as f64;
            }
            adam.step(&mut model);
        }
        epoch_losses.push(total / seqs.len() as f64);
    }
    Ok(TrainedLm {
        model,
        epoch_losses,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct SentenceLosses {
    pub ids: Vec<String>,
    pub losses: Vec<f64>,
    /// Sentences with fewer than two tokens.
    pub skipped: usize,
}

/// Per-sentence mean token loss for every scorable record, in input order.
pub fn sentence_losses<T: Real>(lm: &LanguageModel<T>, vocab: &Vocab, records: &[Record]) -> Result<SentenceLosses> {
    let scored: Vec<Option<(String, f64)>> = records
        .par_iter()
        .map(|r| match lm_ids(&r.text, vocab, lm.config.max_len) {
            None => Ok(None),
            Some(ids) => Ok(Some((r.id.clone(), lm.sentence_loss(&ids)?))),
        })
        .collect::<Result<_>>()?;
    let skipped = scored.iter().filter(|s| s.is_none()).count();
    let (ids, losses) = scored.into_iter().flatten().unzip();
    Ok(SentenceLosses { ids, losses, skipped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub n: usize,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub hist: Histogram,
}

pub const DEFAULT_BINS: usize = 30;

/// Mean, population variance and an equal-width histogram over
/// `[min, max]` (widened by ±0.5 when all values are equal).
pub fn loss_distribution(losses: &[f64], num_bins: usize) -> Result<LossStats> {
    if losses.is_empty() {
        return Err(Error::Input("no losses to summarize".into()));
    }
    if num_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let n = losses.len();
    let mean = losses.iter().sum::<f64>() / n as f64;
    let variance = losses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, max + 0.5) };
    let width = (hi - lo) / num_bins as f64;
    let mut edges: Vec<f64> = (0..num_bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    let mut counts = vec![0; num_bins];
    for &x in losses {
        let b = (((x - lo) / width).floor() as usize).min(num_bins - 1);
        counts[b] += 1;
    }
    Ok(LossStats {
        n,
        mean,
        variance,
        hist: Histogram { edges, counts },
    })
}

/// One cell of the 2×2 grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub lm: LmKind,
    pub train_class: Label,
    pub eval_class: Label,
    pub skipped: usize,
    #[serde(flatten)]
    pub stats: LossStats,
    #[serde(skip)]
    pub losses: SentenceLosses,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub lm: LmConfig,
    pub kinds: Vec<LmKind>,
    pub bins: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            lm: LmConfig::new(LmKind::LstmLm),
            kinds: LmKind::ALL.to_vec(),
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub vocab_size: usize,
    /// Per LM kind: final training loss of the human-trained and
    /// machine-trained models.
    pub final_train_loss: Vec<(LmKind, f64, f64)>,
    pub panels: Vec<Panel>,
}

/// Trains a human LM and a machine LM per kind and scores both validation
/// subsets with each. The vocabulary comes from the union of both training
/// subsets.
pub fn probe_report(
    train_human: &[Record],
    train_machine: &[Record],
    val_human: &[Record],
    val_machine: &[Record],
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    for (name, set) in [
        ("human training", train_human),
        ("machine training", train_machine),
        ("human validation", val_human),
        ("machine validation", val_machine),
    ] {
        if set.is_empty() {
            return Err(Error::Input(format!("{name} subset is empty")));
        }
    }
    if cfg.kinds.is_empty() {
        return Err(Error::Config("probe needs at least one LM kind".into()));
    }
    let mut all = train_human.to_vec();
    all.extend_from_slice(train_machine);
    let vocab = build_vocab(&all, cfg.lm.max_vocab);
    let mut panels = Vec::new();
    let mut final_train_loss = Vec::new();
    for &kind in &cfg.kinds {
        let lm_cfg = LmConfig { kind, ..cfg.lm.clone() };
        let (h, m) = rayon::join(
            || train_lm(train_human, &vocab, &lm_cfg),
            || train_lm(train_machine, &vocab, &lm_cfg),
        );
        let (h, m) = (h?, m?);
        final_train_loss.push((
            kind,
            *h.epoch_losses.last().expect("epochs ≥ 1"),
            *m.epoch_losses.last().expect("epochs ≥ 1"),
        ));
        for (train_class, lm) in [(Label::Human, &h.model), (Label::Machine, &m.model)] {
            for (eval_class, set) in [(Label::Human, val_human), (Label::Machine, val_machine)] {
                let losses = sentence_losses(lm, &vocab, set)?;
                let stats = loss_distribution(&losses.losses, cfg.bins)?;
                panels.push(Panel {
                    lm: kind,
                    train_class,
                    eval_class,
                    skipped: losses.skipped,
                    stats,
                    losses,
                });
            }
        }
    }
    Ok(ProbeReport {
        vocab_size: vocab.len(),
        final_train_loss,
        panels,
    })
}

const SPARK: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];

fn sparkline(counts: &[usize]) -> String {
    let max = counts.iter().copied().max().unwrap_or(0).max(1);
    counts
        .iter()
        .map(|&c| if c == 0 { ' ' } else { SPARK[((c * 8 - 1) / max).min(7)] })
        .collect()
}

impl ProbeReport {
    pub fn panel(&self, lm: LmKind, train: Label, eval: Label) -> Option<&Panel> {
        self.panels
            .iter()
            .find(|p| p.lm == lm && p.train_class == train && p.eval_class == eval)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.panels).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render_table(&self) -> String {
        let rows: Vec<[String; 7]> = self
            .panels
            .iter()
            .map(|p| {
                [
                    p.lm.as_str().to_string(),
                    p.train_class.name().to_string(),
                    p.eval_class.name().to_string(),
                    p.stats.n.to_string(),
                    format!("{:.4}", p.stats.mean),
                    format!("{:.4}", p.stats.variance),
                    sparkline(&p.stats.hist.counts),
                ]
            })
            .collect();
        let mut out = crate::eval::render_columns(
            &["LM", "Trained on", "Scored on", "n", "Mean loss", "Variance", "Histogram"],
            &rows,
        );
        writeln!(out, "vocabulary: {} tokens", self.vocab_size).unwrap();
        out
    }

    /// One CSV per panel (`id,loss`), named `<lm>_<train>_on_<eval>.csv`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for p in &self.panels {
            let path = dir.join(format!(
                "{}_{}_on_{}.csv",
                p.lm.as_str(),
                p.train_class.name(),
                p.eval_class.name()
            ));
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            let csv_err = |e: csv::Error| Error::Input(format!("{}: {e}", path.display()));
            w.write_record(["id", "loss"]).map_err(csv_err)?;
            for (id, loss) in p.losses.ids.iter().zip(&p.losses.losses) {
                w.write_record([id.as_str(), &format!("{loss}")]).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_examples() {
        let s = loss_distribution(&[2.0, 2.0, 2.0], 30).unwrap();
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.hist.counts.iter().filter(|&&c| c > 0).count(), 1);
        let s = loss_distribution(&[0.0, 1.0, 2.0, 3.0], 30).unwrap();
        assert_eq!((s.mean, s.variance), (1.5, 1.25));
        assert_eq!(s.hist.counts.iter().sum::<usize>(), 4);
        assert_eq!(s.hist.edges.len(), 31);
        assert_eq!(*s.hist.edges.last().unwrap(), 3.0);
        assert!(loss_distribution(&[], 3).is_err());
        assert!(loss_distribution(&[1.0], 0).is_err());
    }

    fn vocab_of(n: usize) -> Vocab {
        Vocab::from_tokens((0..n).map(|i| format!("w{i}")).collect()).unwrap()
    }

    #[test]
    fn uniform_model_scores_ln_v() {
        let vocab = vocab_of(40);
        let recs = vec![
            Record::new("a", "w1 w2 w3 w4", Label::Human, "human", "d").unwrap(),
            Record::new("b", "w5 zz w7", Label::Human, "human", "d").unwrap(),
            Record::new("c", "w9", Label::Human, "human", "d").unwrap(),
        ];
        for kind in LmKind::ALL {
            let lm = LanguageModel::<f32>::uniform(LmConfig::new(kind), vocab.len()).unwrap();
            let s = sentence_losses(&lm, &vocab, &recs).unwrap();
            assert_eq!(s.skipped, 1);
            for l in &s.losses {
                assert!((l - (vocab.len() as f64).ln()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mixed_labels_rejected() {
        let recs = vec![
            Record::new("a", "w1 w2", Label::Human, "human", "d").unwrap(),
            Record::new("b", "w1 w2", Label::Machine, "gpt", "d").unwrap(),
        ];
        assert!(train_lm(&recs, &vocab_of(5), &LmConfig::new(LmKind::LstmLm)).is_err());
    }

    #[test]
    fn lr_zero_keeps_loss() {
        let recs: Vec<Record> = (0..4)
            .map(|i| Record::new(format!("{i}"), "w1 w2 w3 w1", Label::Human, "human", "d").unwrap())
            .collect();
        let vocab = build_vocab(&recs, 100);
        for kind in LmKind::ALL {
            let cfg = LmConfig {
                lr: 0.0,
                epochs: 2,
                ..LmConfig::new(kind)
            };
            let t = train_lm(&recs, &vocab, &cfg).unwrap();
            assert_eq!(t.epoch_losses[0], t.epoch_losses[1]);
        }
    }
}
