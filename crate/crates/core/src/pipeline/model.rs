use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocab, encode, Label, Record, TokenSeq, Vocab, DEFAULT_MAX_LEN};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::heads::{DropoutCtx, Head};
use crate::numerics::{param_infos, Module, Parameter, Tensor};
use crate::rng::derive_seed;

use super::train::TrainingMeta;
use super::variant::{ParamAudit, VariantSpec};

/// An encoder (absent when the model reads precomputed embeddings), a head,
/// and the vocabulary the encoder was trained with.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: VariantSpec,
    pub vocab: Vocab,
    pub max_len: usize,
    pub seed: u64,
    pub encoder: Option<Encoder<f32>>,
    pub head: Head<f32>,
    /// Filled in by training.
    pub training: Option<TrainingMeta>,
}

/// Label and machine-class probability for one input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub prob_machine: f64,
}

impl Prediction {
    pub fn from_logits(logits: &[f32]) -> Self {
        let (a, b) = (logits[0] as f64, logits[1] as f64);
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let prob_machine = eb / (ea + eb);
        Prediction {
            label: if b > a { Label::Machine } else { Label::Human },
            prob_machine,
        }
    }
}

impl Model {
    /// Builds the variant with freeze flags and adapters applied. Encoder,
    /// adapter and head initializations derive from `seed`.
    pub fn new(spec: VariantSpec, vocab: Vocab, seed: u64) -> Result<Self> {
        Self::with_head_seed(spec, vocab, seed, derive_seed(seed, "head"))
    }

    /// Like [`Model::new`] but with the head initialized from its own seed;
    /// hyperparameter trials share one encoder and vary only the head.
    pub fn with_head_seed(spec: VariantSpec, vocab: Vocab, seed: u64, head_seed: u64) -> Result<Self> {
        spec.validate()?;
        if vocab.len() > spec.encoder.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary of {} tokens exceeds encoder vocab_size {}",
                vocab.len(),
                spec.encoder.vocab_size
            )));
        }
        let mut encoder = Encoder::new(spec.encoder.clone(), derive_seed(seed, "encoder"))?;
        encoder.set_trainable(&spec.freeze)?;
        if let Some(l) = &spec.lora {
            encoder.apply_lora(l, derive_seed(seed, "lora"))?;
        }
        let head = Head::new(&spec.head, spec.encoder.model_dim, head_seed)?;
        Ok(Model {
            spec,
            vocab,
            max_len: DEFAULT_MAX_LEN,
            seed,
            encoder: Some(encoder),
            head,
            training: None,
        })
    }

    /// Vocabulary from `train` (capped at the encoder's vocab size), then
    /// [`Model::new`].
    pub fn for_training(spec: VariantSpec, train: &[Record], seed: u64) -> Result<Self> {
        let vocab = build_vocab(train, spec.encoder.vocab_size);
        Self::new(spec, vocab, seed)
    }

    /// A head that reads externally computed `input_dim`-wide hidden states.
    pub fn head_only(spec: VariantSpec, input_dim: usize, seed: u64) -> Result<Self> {
        spec.head.validate()?;
        let head = Head::new(&spec.head, input_dim, derive_seed(seed, "head"))?;
        Ok(Model {
            spec,
            vocab: Vocab::specials_only(),
            max_len: DEFAULT_MAX_LEN,
            seed,
            encoder: None,
            head,
            training: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.head.input_dim()
    }

    pub fn audit(&self) -> ParamAudit {
        ParamAudit::from_infos(self.spec.name.as_str(), &param_infos(self))
    }

    fn encoder(&self) -> Result<&Encoder<f32>> {
        self.encoder.as_ref().ok_or_else(|| {
            Error::Input("model reads precomputed embeddings; it has no encoder for raw text".into())
        })
    }

    /// Tokenized input, truncated to the model's `max_len` and to the
    /// encoder's position table.
    pub fn tokenize(&self, text: &str) -> TokenSeq {
        let cap = self
            .encoder
            .as_ref()
            .map_or(self.max_len, |e| self.max_len.min(e.config.max_positions));
        encode(text, &self.vocab, cap)
    }

    /// Encoder hidden states `[T × d]`.
    pub fn hidden(&self, seq: &TokenSeq) -> Result<Tensor<f32>> {
        self.encoder()?.encode(&seq.ids, &seq.attention_mask)
    }

    pub fn logits(&self, seq: &TokenSeq) -> Result<Tensor<f32>> {
        let h = self.hidden(seq)?;
        self.head.logits(&h, &seq.attention_mask)
    }

    pub fn logits_from_hidden(&self, hidden: &Tensor<f32>, mask: &[u8]) -> Result<Tensor<f32>> {
        self.head.forward(hidden, mask, DropoutCtx::EVAL).map(|(l, _)| l)
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        let l = self.logits(&self.tokenize(text))?;
        Ok(Prediction::from_logits(l.data()))
    }

    /// One prediction per text, in order; computed in parallel.
    pub fn predict(&self, texts: &[String]) -> Result<Vec<Prediction>> {
        use rayon::prelude::*;
        texts.par_iter().map(|t| self.predict_text(t)).collect()
    }
}

impl Module<f32> for Model {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f32>)) {
        if let Some(e) = &self.encoder {
            e.visit(f);
        }
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f32>)) {
        if let Some(e) = &mut self.encoder {
            e.visit_mut(f);
        }
        self.head.visit_mut(f);
    }
}
