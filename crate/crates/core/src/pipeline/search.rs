use std::cmp::Ordering;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocab, Record};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed};

use super::model::Model;
use super::train::{encoder_trains, prepare, train_examples, EpochRecord, TrainConfig};
use super::variant::VariantSpec;

/// Candidate values per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub hidden: Vec<usize>,
    pub layers: Vec<usize>,
    pub dropout: Vec<f64>,
    pub lr: Vec<f64>,
}

impl SearchSpace {
    /// Single-point space at the given spec and training defaults.
    pub fn around(spec: &VariantSpec, cfg: &TrainConfig) -> Self {
        SearchSpace {
            hidden: vec![spec.head.hidden_size],
            layers: vec![spec.head.num_layers],
            dropout: vec![spec.head.dropout],
            lr: vec![cfg.lr],
        }
    }

    /// Eight points: hidden ×{1, 2}, 1 or 2 layers, lr ×{1, 3}; dropout
    /// fixed at the spec's value.
    pub fn neighborhood(spec: &VariantSpec, cfg: &TrainConfig) -> Self {
        let h = spec.head.hidden_size;
        SearchSpace {
            hidden: vec![h, 2 * h],
            layers: vec![1, 2],
            dropout: vec![spec.head.dropout],
            lr: vec![cfg.lr, 3.0 * cfg.lr],
        }
    }

    pub fn size(&self) -> usize {
        self.hidden.len() * self.layers.len() * self.dropout.len() * self.lr.len()
    }

    /// Cartesian product in axis order (hidden slowest, lr fastest).
    pub fn grid(&self) -> Vec<TrialConfig> {
        let mut out = Vec::with_capacity(self.size());
        for &hidden in &self.hidden {
            for &layers in &self.layers {
                for &dropout in &self.dropout {
                    for &lr in &self.lr {
                        out.push(TrialConfig {
                            hidden,
                            layers,
                            dropout,
                            lr,
                        });
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.size() == 0 {
            return Err(Error::Config("search space has an empty axis".into()));
        }
        if self.dropout.iter().chain(&self.lr).any(|v| !v.is_finite()) {
            return Err(Error::Config("search space values must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    /// `n` distinct points of the grid, sampled with `seed`.
    Random { n: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub lr: f64,
}

impl TrialConfig {
    /// Canonical text form; also names the trial's seed stream.
    pub fn key(&self) -> String {
        format!(
            "hidden={},layers={},dropout={},lr={}",
            self.hidden, self.layers, self.dropout, self.lr
        )
    }

    /// Numeric lexicographic order over (hidden, layers, dropout, lr).
    pub fn cmp_config(&self, other: &Self) -> Ordering {
        self.hidden
            .cmp(&other.hidden)
            .then(self.layers.cmp(&other.layers))
            .then(self.dropout.total_cmp(&other.dropout))
            .then(self.lr.total_cmp(&other.lr))
    }
}

/// Samples the trial list for a strategy.
pub fn trial_configs(space: &SearchSpace, strategy: Strategy) -> Result<Vec<TrialConfig>> {
    space.validate()?;
    let grid = space.grid();
    match strategy {
        Strategy::Grid => Ok(grid),
        Strategy::Random { n: 0, .. } => Err(Error::Config("random search needs n ≥ 1".into())),
        Strategy::Random { n, seed } => {
            let n = n.min(grid.len());
            let mut r = rng::rng(derive_seed(seed, "search"));
            let mut picks = sample(&mut r, grid.len(), n).into_vec();
            picks.sort_unstable();
            Ok(picks.into_iter().map(|i| grid[i]).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TrialConfig,
    pub seed: u64,
    pub val_accuracy: f64,
    pub trainable_params: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Best first: validation accuracy, then fewer parameters, then config order.
    pub ranked: Vec<Trial>,
    /// Every trial in config order, independent of completion order.
    pub log: Vec<Trial>,
}

impl SearchResult {
    pub fn best(&self) -> &Trial {
        &self.ranked[0]
    }
}

fn rank(a: &Trial, b: &Trial) -> Ordering {
    b.val_accuracy
        .total_cmp(&a.val_accuracy)
        .then(a.trainable_params.cmp(&b.trainable_params))
        .then(a.config.cmp_config(&b.config))
}

/// Trains one model per sampled configuration (in parallel) and ranks them.
/// All trials share the encoder built from `cfg.seed`; each head and its
/// training stream use a seed derived from the trial's config key.
pub fn hyperparam_search(
    spec: &VariantSpec,
    train: &[Record],
    val: &[Record],
    space: &SearchSpace,
    strategy: Strategy,
    cfg: &TrainConfig,
) -> Result<SearchResult> {
    let configs = trial_configs(space, strategy)?;
    cfg.validate()?;
    let vocab = build_vocab(train, spec.encoder.vocab_size);
    let mut base = Model::new(spec.clone(), vocab, cfg.seed)?;
    base.max_len = cfg.max_len;
    // Frozen encoders are shared, so their features are computed once.
    let shared = if encoder_trains(&base) {
        None
    } else {
        Some((prepare(&base, train, true)?, prepare(&base, val, true)?))
    };
    let mut trials: Vec<Trial> = configs
        .par_iter()
        .map(|tc| {
            let seed = derive_seed(cfg.seed, &tc.key());
            let mut s = spec.clone();
            s.head.hidden_size = tc.hidden;
            s.head.num_layers = tc.layers;
            s.head.dropout = tc.dropout;
            let mut model = Model::with_head_seed(s, base.vocab.clone(), cfg.seed, derive_seed(seed, "head"))?;
            model.max_len = cfg.max_len;
            let tcfg = TrainConfig {
                lr: tc.lr,
                seed,
                ..cfg.clone()
            };
            let trained = match &shared {
                Some((tr, va)) => train_examples(model, tr, va, &tcfg)?,
                None => {
                    let tr = prepare(&model, train, false)?;
                    let va = prepare(&model, val, false)?;
                    train_examples(model, &tr, &va, &tcfg)?
                }
            };
            let meta = trained.training.as_ref().expect("trained");
            let best = &meta.history[meta.best_epoch - 1];
            Ok(Trial {
                config: *tc,
                seed,
                val_accuracy: best.val_accuracy,
                trainable_params: trained.audit().total,
                best_epoch: meta.best_epoch,
                history: meta.history.clone(),
            })
        })
        .collect::<Result<_>>()?;
    trials.sort_by(|a, b| a.config.cmp_config(&b.config));
    let log = trials.clone();
    trials.sort_by(rank);
    Ok(SearchResult { ranked: trials, log })
}
