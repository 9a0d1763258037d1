//! The `mgtd` command line. [`dispatch`] does everything; the binary only
//! forwards `argv` and the process streams.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error or failed check.

use std::io::{Read as _, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{
    build_vocab, corpus_stats, load_jsonl_with, shuffled_order, split_by_label, train_val_split, FieldMap, Label,
    Record,
};
use crate::error::{Error, Result};
use crate::eval::{report, Format, ReportRow};
use crate::gradsuite::run_suite;
use crate::numerics::GradCheckConfig;
use crate::pipeline::{
    embed_records, evaluate_records, hyperparam_search, load_checkpoint, metrics_for, render_audit, save_checkpoint,
    train, train_examples, variant_spec, EmbeddingSet, Model, Overrides, Preset, SearchSpace, Strategy, TrainConfig,
    VariantName, VariantSpec,
};
use crate::probe::{probe_report, LmConfig, LmKind, ProbeConfig, DEFAULT_BINS};
use crate::rng::{derive_seed, DEFAULT_SEED};
use crate::synthetic::probe_corpus;

/// Environment variable read when `--seed` is absent.
pub const SEED_ENV: &str = "MGT_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mgtd", version, about = "Machine-generated text detection toolkit")]
pub struct Cli {
    /// Root seed for every random stream [default: $MGT_SEED, else 2024]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output format for stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generator × domain record counts.
    Stats(StatsArgs),
    /// Trainable-parameter audit per variant.
    Params(ParamsArgs),
    /// Train a variant and write a checkpoint.
    Train(TrainArgs),
    /// Hyperparameter search over head size, depth, dropout and learning rate.
    Search(SearchArgs),
    /// Metrics report for one or more checkpoints on labeled data.
    Eval(EvalArgs),
    /// Label raw texts, one per line.
    Predict(PredictArgs),
    /// Language-model loss probe: the 2×2 human/machine loss grid.
    Probe(ProbeArgs),
    /// Run the finite-difference gradient-check suite.
    Gradcheck(GradcheckArgs),
    /// Precompute encoder hidden states for head-only training.
    Embed(EmbedArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    #[arg(long, default_value = "id")]
    pub id_field: String,
    #[arg(long, default_value = "text")]
    pub text_field: String,
    #[arg(long, default_value = "label")]
    pub label_field: String,
    #[arg(long, default_value = "model")]
    pub generator_field: String,
    #[arg(long, default_value = "source")]
    pub domain_field: String,
    /// Treat label 0 as machine and 1 as human.
    #[arg(long)]
    pub invert_labels: bool,
}

impl FieldArgs {
    fn map(&self) -> FieldMap {
        FieldMap {
            id: self.id_field.clone(),
            text: self.text_field.clone(),
            label: self.label_field.clone(),
            generator: self.generator_field.clone(),
            domain: self.domain_field.clone(),
            invert_labels: self.invert_labels,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "bilstm_frozen")]
    pub variant: VariantName,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[arg(long)]
    pub head_hidden: Option<usize>,
    #[arg(long)]
    pub head_layers: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lora_rank: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub attention_window: Option<usize>,
}

impl ModelArgs {
    fn spec(&self) -> Result<VariantSpec> {
        variant_spec(
            self.variant,
            self.preset,
            &Overrides {
                head_hidden: self.head_hidden,
                head_layers: self.head_layers,
                dropout: self.dropout,
                lora_rank: self.lora_rank,
                vocab_size: self.vocab_size,
                attention_window: self.attention_window,
            },
        )
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Head and adapter learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Learning rate for unfrozen encoder layers.
    #[arg(long, default_value_t = 2e-5)]
    pub backbone_lr: f64,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    #[arg(long, default_value_t = 256)]
    pub max_len: usize,
}

impl TrainingArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            backbone_lr: self.backbone_lr,
            patience: self.patience,
            max_len: self.max_len,
            seed,
        }
    }
}

/// Training data: a JSONL file plus either a validation file or a held-out
/// fraction.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Share of `--train` held out for validation when `--val` is absent.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[command(flatten)]
    pub fields: FieldArgs,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<(Vec<Record>, Vec<Record>)> {
        let path = self
            .train
            .as_ref()
            .ok_or_else(|| Error::Input("--train is required".into()))?;
        let records = load_jsonl_with(path, &self.fields.map())?;
        match &self.val {
            Some(v) => Ok((records, load_jsonl_with(v, &self.fields.map())?)),
            None => {
                check_fraction(self.val_fraction)?;
                Ok(train_val_split(&records, 1.0 - self.val_fraction, derive_seed(seed, "split")))
            }
        }
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("validation fraction must be in (0, 1), got {f}")))
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub fields: FieldArgs,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Variants to audit (repeatable); all six when omitted.
    #[arg(long)]
    pub variant: Vec<VariantName>,
    #[arg(long, value_enum, default_value_t = Preset::Base)]
    pub preset: Preset,
    #[arg(long)]
    pub head_hidden: Option<usize>,
    #[arg(long)]
    pub head_layers: Option<usize>,
    #[arg(long)]
    pub lora_rank: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Train a head on precomputed hidden states instead of `--train`.
    #[arg(long, conflicts_with = "train")]
    pub embeddings: Option<PathBuf>,
    /// Validation hidden states for `--embeddings`.
    #[arg(long, requires = "embeddings")]
    pub val_embeddings: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the training summary as JSON.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Grid,
    Random,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Grid)]
    pub strategy: StrategyArg,
    /// Trials for the random strategy. The default space is hidden size ×{1, 2},
    /// 1 or 2 layers and lr ×{1, 3}; the flags below replace single axes.
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long = "dropouts", value_delimiter = ',')]
    pub dropouts: Option<Vec<f64>>,
    #[arg(long = "lrs", value_delimiter = ',')]
    pub lrs: Option<Vec<f64>>,
    /// Write the full trial log as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoints to compare (repeatable).
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, required_unless_present = "embeddings")]
    pub input: Option<PathBuf>,
    /// Precomputed hidden states, for head-only checkpoints.
    #[arg(long, conflicts_with = "input")]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub fields: FieldArgs,
    /// Also write the report to this path (in `--format`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Text file with one document per line; stdin when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum LmArg {
    LstmLm,
    TransformerLm,
    Both,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Labeled JSONL; each class is split into train and validation.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Use the generated low/high-entropy corpora with this many sentences
    /// per class.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[command(flatten)]
    pub fields: FieldArgs,
    #[arg(long, value_enum, default_value_t = LmArg::Both)]
    pub lm: LmArg,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub model_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Write one `id,loss` CSV per panel into this directory.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Sampled coordinates per tensor.
    #[arg(long, default_value_t = 64)]
    pub max_coords: usize,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Use this checkpoint's encoder and vocabulary.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Without a checkpoint: build the vocabulary from this JSONL (default:
    /// `--input`) and a fresh encoder from `--seed`.
    #[arg(long, conflicts_with = "checkpoint")]
    pub vocab_from: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 256)]
    pub max_len: usize,
    #[command(flatten)]
    pub fields: FieldArgs,
}

/// Resolves the root seed: flag, then `MGT_SEED`, then [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> std::result::Result<u64, String> {
    match (flag, env) {
        (Some(s), _) => Ok(s),
        (None, Some(v)) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV} must be an unsigned integer, got `{v}`")),
        (None, None) => Ok(DEFAULT_SEED),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn dispatch<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let env = std::env::var(SEED_ENV).ok();
    let seed = match resolve_seed(cli.seed, env.as_deref()) {
        Ok(s) => s,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let ctx = Ctx {
        seed,
        format: cli.format,
    };
    let result = match &cli.command {
        Command::Stats(a) => ctx.stats(a, out),
        Command::Params(a) => ctx.params(a, out),
        Command::Train(a) => ctx.train(a, out),
        Command::Search(a) => ctx.search(a, out),
        Command::Eval(a) => ctx.eval(a, out),
        Command::Predict(a) => ctx.predict(a, out),
        Command::Probe(a) => ctx.probe(a, out),
        Command::Gradcheck(a) => ctx.gradcheck(a, out),
        Command::Embed(a) => ctx.embed(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

struct Ctx {
    seed: u64,
    format: Format,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    variant: &'a str,
    seed: u64,
    best_epoch: usize,
    stopped_early: bool,
    val_accuracy: f64,
    val_f1_macro: f64,
    trainable_params: usize,
    history: &'a [crate::pipeline::EpochRecord],
}

#[derive(Serialize)]
struct PredictionRow {
    line: usize,
    label: &'static str,
    prob_machine: f64,
}

impl Ctx {
    fn stats(&self, a: &StatsArgs, out: &mut dyn Write) -> Result<i32> {
        let records = load_jsonl_with(&a.input, &a.fields.map())?;
        let stats = corpus_stats(&records);
        let text = match self.format {
            Format::Table => stats.render_table(),
            Format::Json => json(&stats),
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }

    fn params(&self, a: &ParamsArgs, out: &mut dyn Write) -> Result<i32> {
        let names = if a.variant.is_empty() {
            VariantName::ALL.to_vec()
        } else {
            a.variant.clone()
        };
        let ov = Overrides {
            head_hidden: a.head_hidden,
            head_layers: a.head_layers,
            lora_rank: a.lora_rank,
            ..Overrides::default()
        };
        let audits = names
            .iter()
            .map(|&n| Ok(variant_spec(n, a.preset, &ov)?.audit()))
            .collect::<Result<Vec<_>>>()?;
        let text = match self.format {
            Format::Table => render_audit(&audits),
            Format::Json => json(&audits),
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }

    fn train(&self, a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
        let spec = a.model.spec()?;
        let cfg = a.training.config(self.seed);
        let model = match &a.embeddings {
            Some(path) => {
                let set = EmbeddingSet::load(path)?;
                let (tr, va) = match &a.val_embeddings {
                    Some(v) => (set.examples(), EmbeddingSet::load(v)?.examples()),
                    None => {
                        check_fraction(a.data.val_fraction)?;
                        let all = set.examples();
                        let order = shuffled_order(all.len(), derive_seed(self.seed, "split"));
                        let cut = ((all.len() as f64) * (1.0 - a.data.val_fraction)).round() as usize;
                        let pick = |idx: &[usize]| idx.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
                        (pick(&order[..cut]), pick(&order[cut..]))
                    }
                };
                let model = Model::head_only(spec, set.model_dim, self.seed)?;
                train_examples(model, &tr, &va, &cfg)?
            }
            None => {
                let (tr, va) = a.data.load(self.seed)?;
                let model = Model::for_training(spec, &tr, self.seed)?;
                train(model, &tr, &va, &cfg)?
            }
        };
        save_checkpoint(&model, &a.out)?;
        let meta = model.training.as_ref().expect("trained model has history");
        let best = &meta.history[meta.best_epoch - 1];
        let summary = TrainSummary {
            variant: model.spec.name.as_str(),
            seed: self.seed,
            best_epoch: meta.best_epoch,
            stopped_early: meta.stopped_early,
            val_accuracy: best.val_accuracy,
            val_f1_macro: best.val_f1_macro,
            trainable_params: model.audit().total,
            history: &meta.history,
        };
        if let Some(h) = &a.history {
            write_file(h, &json(&summary))?;
        }
        let text = match self.format {
            Format::Json => json(&summary),
            Format::Table => {
                let rows: Vec<[String; 5]> = meta
                    .history
                    .iter()
                    .map(|e| {
                        [
                            e.epoch.to_string(),
                            format!("{:.4}", e.train_loss),
                            format!("{:.4}", e.val_loss),
                            format!("{:.4}", e.val_accuracy),
                            format!("{:.4}", e.val_f1_macro),
                        ]
                    })
                    .collect();
                let mut t = crate::eval::render_columns(
                    &["Epoch", "Train loss", "Val loss", "Val acc", "Val F1 (macro)"],
                    &rows,
                );
                t.push_str(&format!(
                    "{}: best epoch {} (val acc {:.4}){}, {} trainable params, saved {}\n",
                    summary.variant,
                    summary.best_epoch,
                    summary.val_accuracy,
                    if summary.stopped_early { ", stopped early" } else { "" },
                    crate::eval::format_params(summary.trainable_params),
                    a.out.display()
                ));
                t
            }
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }

    fn search(&self, a: &SearchArgs, out: &mut dyn Write) -> Result<i32> {
        let spec = a.model.spec()?;
        let cfg = a.training.config(self.seed);
        let (tr, va) = a.data.load(self.seed)?;
        let mut space = SearchSpace::neighborhood(&spec, &cfg);
        if let Some(v) = &a.hidden {
            space.hidden = v.clone();
        }
        if let Some(v) = &a.layers {
            space.layers = v.clone();
        }
        if let Some(v) = &a.dropouts {
            space.dropout = v.clone();
        }
        if let Some(v) = &a.lrs {
            space.lr = v.clone();
        }
        let strategy = match a.strategy {
            StrategyArg::Grid => Strategy::Grid,
            StrategyArg::Random => Strategy::Random {
                n: a.trials,
                seed: derive_seed(self.seed, "search"),
            },
        };
        let result = hyperparam_search(&spec, &tr, &va, &space, strategy, &cfg)?;
        if let Some(p) = &a.out {
            write_file(p, &json(&result))?;
        }
        let text = match self.format {
            Format::Json => json(&result.ranked),
            Format::Table => {
                let rows: Vec<[String; 7]> = result
                    .ranked
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        [
                            (i + 1).to_string(),
                            t.config.hidden.to_string(),
                            t.config.layers.to_string(),
                            format!("{}", t.config.dropout),
                            format!("{:e}", t.config.lr),
                            format!("{:.4}", t.val_accuracy),
                            crate::eval::with_commas(t.trainable_params),
                        ]
                    })
                    .collect();
                crate::eval::render_columns(
                    &["Rank", "Hidden", "Layers", "Dropout", "LR", "Val acc", "Params"],
                    &rows,
                )
            }
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }

    fn eval(&self, a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
        let mut rows = Vec::new();
        let records = match &a.input {
            Some(p) => Some(load_jsonl_with(p, &a.fields.map())?),
            None => None,
        };
        let embeddings = match &a.embeddings {
            Some(p) => Some(EmbeddingSet::load(p)?.examples()),
            None => None,
        };
        for path in &a.checkpoint {
            let model = load_checkpoint(path)?;
            let metrics = match (&records, &embeddings) {
                (Some(r), _) => {
                    if model.encoder.is_none() {
                        return Err(Error::Input(format!(
                            "{} is a head-only checkpoint; evaluate it with --embeddings",
                            path.display()
                        )));
                    }
                    evaluate_records(&model, r)?.1
                }
                (None, Some(ex)) => metrics_for(&model, ex)?.1,
                (None, None) => unreachable!("clap requires one input"),
            };
            rows.push(ReportRow {
                model: model.spec.name.as_str().to_string(),
                metrics,
                trainable_params: model.audit().total,
            });
        }
        let text = report(&rows, self.format);
        if let Some(p) = &a.out {
            write_file(p, &text)?;
        }
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }

    fn predict(&self, a: &PredictArgs, out: &mut dyn Write) -> Result<i32> {
        let model = load_checkpoint(&a.checkpoint)?;
        if model.encoder.is_none() {
            return Err(Error::Input("a head-only checkpoint cannot read raw text".into()));
        }
        let content = match &a.input {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => {
                let mut s = String::new();
                std::io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| Error::io("<stdin>", e))?;
                s
            }
        };
        let (lines, texts): (Vec<usize>, Vec<String>) = content
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.to_string()))
            .unzip();
        let preds = model.predict(&texts)?;
        let rows: Vec<PredictionRow> = lines
            .iter()
            .zip(&preds)
            .map(|(&line, p)| PredictionRow {
                line,
                label: p.label.name(),
                prob_machine: p.prob_machine,
            })
            .collect();
        let text = match self.format {
            Format::Json => json(&rows),
            Format::Table => crate::eval::render_columns(
                &["Line", "Label", "P(machine)"],
                &rows
                    .iter()
                    .map(|r| [r.line.to_string(), r.label.to_string(), format!("{:.4}", r.prob_machine)])
                    .collect::<Vec<_>>(),
            ),
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }

    fn probe(&self, a: &ProbeArgs, out: &mut dyn Write) -> Result<i32> {
        check_fraction(a.val_fraction)?;
        let (human, machine) = match (&a.input, a.synthetic) {
            (Some(p), _) => split_by_label(&load_jsonl_with(p, &a.fields.map())?),
            (None, Some(n)) => probe_corpus(n, derive_seed(self.seed, "probe-data")),
            (None, None) => unreachable!("clap requires one source"),
        };
        let split = |recs: &[Record], label: Label| {
            train_val_split(recs, 1.0 - a.val_fraction, derive_seed(self.seed, label.name()))
        };
        let (th, vh) = split(&human, Label::Human);
        let (tm, vm) = split(&machine, Label::Machine);
        let kinds = match a.lm {
            LmArg::LstmLm => vec![LmKind::LstmLm],
            LmArg::TransformerLm => vec![LmKind::TransformerLm],
            LmArg::Both => LmKind::ALL.to_vec(),
        };
        let cfg = ProbeConfig {
            lm: LmConfig {
                model_dim: a.model_dim,
                layers: a.layers,
                max_len: a.max_len,
                epochs: a.epochs,
                lr: a.lr,
                seed: self.seed,
                ..LmConfig::new(kinds[0])
            },
            kinds,
            bins: a.bins,
        };
        let rep = probe_report(&th, &tm, &vh, &vm, &cfg)?;
        if let Some(dir) = &a.csv_dir {
            rep.write_csv(dir)?;
        }
        if let Some(p) = &a.out {
            write_file(p, &rep.to_json())?;
        }
        let text = match self.format {
            Format::Json => rep.to_json(),
            Format::Table => rep.render_table(),
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }

    fn gradcheck(&self, a: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
        let cfg = GradCheckConfig {
            step: a.step,
            tolerance: a.tolerance,
            max_coords: a.max_coords,
            seed: self.seed,
        };
        let rep = run_suite(&cfg);
        let text = match self.format {
            Format::Json => json(&rep),
            Format::Table => rep.render_table(),
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(if rep.passed() { EXIT_OK } else { EXIT_DATA })
    }

    fn embed(&self, a: &EmbedArgs, out: &mut dyn Write) -> Result<i32> {
        let records = load_jsonl_with(&a.input, &a.fields.map())?;
        let model = match &a.checkpoint {
            Some(p) => {
                let m = load_checkpoint(p)?;
                if m.encoder.is_none() {
                    return Err(Error::Input("checkpoint has no encoder to embed with".into()));
                }
                m
            }
            None => {
                let spec = a.model.spec()?;
                let vocab_src = match &a.vocab_from {
                    Some(p) => load_jsonl_with(p, &a.fields.map())?,
                    None => records.clone(),
                };
                let vocab = build_vocab(&vocab_src, spec.encoder.vocab_size);
                let mut m = Model::new(spec, vocab, self.seed)?;
                m.max_len = a.max_len;
                m
            }
        };
        let set = embed_records(&model, &records)?;
        set.save(&a.out)?;
        let summary = serde_json::json!({
            "records": set.records.len(),
            "model_dim": set.model_dim,
            "out": a.out.display().to_string(),
        });
        let text = match self.format {
            Format::Json => json(&summary),
            Format::Table => format!(
                "embedded {} records (model_dim {}) into {}\n",
                set.records.len(),
                set.model_dim,
                a.out.display()
            ),
        };
        out.write_all(text.as_bytes()).map_err(io_err)?;
        Ok(EXIT_OK)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["mgtd"];
        argv.extend_from_slice(args);
        let code = dispatch(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn seed_resolution() {
        assert_eq!(resolve_seed(Some(5), Some("9")), Ok(5));
        assert_eq!(resolve_seed(None, Some("9")), Ok(9));
        assert_eq!(resolve_seed(None, None), Ok(DEFAULT_SEED));
        assert!(resolve_seed(None, Some("x")).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run(&["params", "--bogus"]).0, EXIT_USAGE);
        let (code, _, err) = run(&["predict"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--checkpoint"));
        assert_eq!(run(&["params", "--variant", "nope"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("gradcheck"));
    }

    #[test]
    fn params_bilstm_base() {
        let (code, out, _) = run(&["params", "--variant", "bilstm_frozen", "--preset", "base"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("3,675,138") && out.contains("≈4M"), "{out}");
    }

    #[test]
    fn missing_file_is_data_error() {
        let (code, _, err) = run(&["stats", "--input", "/nonexistent/x.jsonl"]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("x.jsonl"));
    }
}
