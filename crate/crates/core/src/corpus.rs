//! JSONL ingestion, generator × domain statistics, the word-level tokenizer,
//! vocabulary construction and padded batching.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rng;

pub const PAD: u32 = 0;
pub const CLS: u32 = 1;
pub const SEP: u32 = 2;
pub const UNK: u32 = 3;
pub const NUM_SPECIAL: usize = 4;
pub const SPECIAL_TOKENS: [&str; NUM_SPECIAL] = ["<pad>", "<cls>", "<sep>", "<unk>"];

pub const DEFAULT_MAX_LEN: usize = 512;
pub const HUMAN: &str = "human";

/// Binary label. `Machine` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Human,
    Machine,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Human => 0,
            Label::Machine => 1,
        }
    }

    pub fn as_index(self) -> usize {
        self.as_u8() as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Human),
            1 => Some(Label::Machine),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Human => "human",
            Label::Machine => "machine",
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label must be 0 or 1, got {v}"))
    }
}

/// One labeled text sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub generator: String,
    pub domain: String,
}

impl Record {
    /// Builds a record, checking the label/generator and non-empty text invariants.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        label: Label,
        generator: impl Into<String>,
        domain: impl Into<String>,
    ) -> std::result::Result<Self, String> {
        let rec = Record {
            id: id.into(),
            text: text.into(),
            label,
            generator: generator.into(),
            domain: domain.into(),
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("text is empty".into());
        }
        let is_human = self.generator == HUMAN;
        match (self.label, is_human) {
            (Label::Human, false) => Err(format!(
                "label 0 (human) but generator is `{}`",
                self.generator
            )),
            (Label::Machine, true) => Err("label 1 (machine) but generator is `human`".into()),
            _ => Ok(()),
        }
    }
}

/// Field names used when reading JSONL, plus the label polarity switch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMap {
    pub id: String,
    pub text: String,
    pub label: String,
    pub generator: String,
    pub domain: String,
    /// Read label 0 as machine and 1 as human.
    pub invert_labels: bool,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            text: "text".into(),
            label: "label".into(),
            generator: "model".into(),
            domain: "source".into(),
            invert_labels: false,
        }
    }
}

/// Loads records from a JSONL file using the default field names.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    load_jsonl_with(path, &FieldMap::default())
}

pub fn load_jsonl_with(path: impl AsRef<Path>, fields: &FieldMap) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&content, fields)
}

/// Parses JSONL content. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl(content: &str, fields: &FieldMap) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| Error::MalformedLine {
            line,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::MalformedLine {
            line,
            message: "expected a JSON object".into(),
        })?;
        let get = |field: &str| {
            obj.get(field).ok_or_else(|| Error::MissingField {
                line,
                field: field.to_string(),
            })
        };
        let get_str = |field: &str| -> Result<String> {
            match get(field)? {
                Value::String(s) => Ok(s.clone()),
                other => Err(Error::InvalidRecord {
                    line,
                    message: format!("field `{field}` must be a string, got {other}"),
                }),
            }
        };

        let text = get_str(&fields.text)?;
        let generator = get_str(&fields.generator)?;
        let domain = get_str(&fields.domain)?;
        let raw_label = parse_label(get(&fields.label)?).ok_or_else(|| Error::InvalidRecord {
            line,
            message: format!("unknown label value {}", obj[&fields.label]),
        })?;
        let label = match (raw_label, fields.invert_labels) {
            (l, false) => l,
            (Label::Human, true) => Label::Machine,
            (Label::Machine, true) => Label::Human,
        };
        let id = match obj.get(&fields.id) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => line.to_string(),
        };
        let record = Record {
            id,
            text,
            label,
            generator,
            domain,
        };
        record
            .validate()
            .map_err(|message| Error::InvalidRecord { line, message })?;
        out.push(record);
    }
    Ok(out)
}

fn parse_label(v: &Value) -> Option<Label> {
    match v {
        Value::Number(n) => match n.as_u64() {
            Some(0) => Some(Label::Human),
            Some(1) => Some(Label::Machine),
            _ => None,
        },
        Value::String(s) => match s.trim() {
            "0" => Some(Label::Human),
            "1" => Some(Label::Machine),
            _ => None,
        },
        _ => None,
    }
}

/// Generator × domain counts over a record list.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// domain → generator → count
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub totals_by_generator: BTreeMap<String, usize>,
    pub totals_by_domain: BTreeMap<String, usize>,
    pub total: usize,
}

impl CorpusStats {
    pub fn count(&self, generator: &str, domain: &str) -> usize {
        self.counts
            .get(domain)
            .and_then(|row| row.get(generator))
            .copied()
            .unwrap_or(0)
    }

    /// Generators in column order: alphabetical, with `human` last.
    pub fn generators(&self) -> Vec<String> {
        let mut gens: Vec<String> = self.totals_by_generator.keys().cloned().collect();
        gens.sort_by_key(|g| (g == HUMAN, g.clone()));
        gens
    }

    pub fn domains(&self) -> Vec<String> {
        self.totals_by_domain.keys().cloned().collect()
    }

    /// Aligned text grid: one row per domain, one column per generator.
    pub fn render_table(&self) -> String {
        let gens = self.generators();
        let domains = self.domains();
        let mut header = vec!["Model/Source".to_string()];
        header.extend(gens.iter().cloned());
        header.push("total".into());
        let mut rows = vec![header];
        for d in &domains {
            let mut row = vec![d.clone()];
            row.extend(gens.iter().map(|g| self.count(g, d).to_string()));
            row.push(self.totals_by_domain[d].to_string());
            rows.push(row);
        }
        let mut total_row = vec!["total".to_string()];
        total_row.extend(gens.iter().map(|g| self.totals_by_generator[g].to_string()));
        total_row.push(self.total.to_string());
        rows.push(total_row);

        let ncols = rows[0].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c == 0 {
                    let _ = write!(line, "{:<w$}", cell, w = widths[c]);
                } else {
                    let _ = write!(line, "  {:>w$}", cell, w = widths[c]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 0 || i == rows.len() - 2 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (ncols - 1)));
                out.push('\n');
            }
        }
        out
    }
}

pub fn corpus_stats(records: &[Record]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for r in records {
        *stats
            .counts
            .entry(r.domain.clone())
            .or_default()
            .entry(r.generator.clone())
            .or_insert(0) += 1;
        *stats
            .totals_by_generator
            .entry(r.generator.clone())
            .or_insert(0) += 1;
        *stats.totals_by_domain.entry(r.domain.clone()).or_insert(0) += 1;
        stats.total += 1;
    }
    stats
}

/// Lowercases, splits on whitespace and detaches every non-alphanumeric
/// character into its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Token ↔ id mapping. Ids 0..4 are the specials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn specials_only() -> Self {
        Self::from_tokens(Vec::new()).expect("empty token list is valid")
    }

    /// Rebuilds a vocabulary from its non-special tokens, in id order.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut all: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Input(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocab { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Non-special tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens[NUM_SPECIAL..]
    }

    /// Maps ids back to tokens, dropping PAD/CLS/SEP.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .filter(|&&id| id != PAD && id != CLS && id != SEP)
            .filter_map(|&id| self.token(id).map(str::to_string))
            .collect()
    }
}

/// Frequency-ranked vocabulary, ties broken lexicographically, capped at
/// `max_size` ids including the four specials.
pub fn build_vocab(records: &[Record], max_size: usize) -> Vocab {
    assert!(max_size > NUM_SPECIAL, "max_size must be at least 5");
    let mut freq: HashMap<String, usize> = HashMap::new();
    for r in records {
        for t in tokenize(&r.text) {
            *freq.entry(t).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size - NUM_SPECIAL);
    Vocab::from_tokens(ranked.into_iter().map(|(t, _)| t).collect())
        .expect("tokens from a frequency map are unique")
}

/// An encoded sequence before batch padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    /// Length `[CLS] + tokens + [SEP]` would have had without truncation.
    pub original_length: usize,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// `[CLS] tokens [SEP]`, truncated so the total fits in `max_len` (≥ 2).
pub fn encode(text: &str, vocab: &Vocab, max_len: usize) -> TokenSeq {
    let max_len = max_len.max(2);
    let tokens = tokenize(text);
    let original_length = tokens.len() + 2;
    let keep = tokens.len().min(max_len - 2);
    let mut ids = Vec::with_capacity(keep + 2);
    ids.push(CLS);
    ids.extend(tokens[..keep].iter().map(|t| vocab.id(t)));
    ids.push(SEP);
    let attention_mask = vec![1; ids.len()];
    TokenSeq {
        ids,
        attention_mask,
        original_length,
    }
}

/// One padded batch. `ids` and `mask` are row-major `[batch × seq_len]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub ids: Vec<u32>,
    pub mask: Vec<u8>,
    pub labels: Vec<Label>,
    pub indices: Vec<usize>,
    pub batch_size: usize,
    pub seq_len: usize,
}

impl Batch {
    pub fn row_ids(&self, row: usize) -> &[u32] {
        &self.ids[row * self.seq_len..(row + 1) * self.seq_len]
    }

    pub fn row_mask(&self, row: usize) -> &[u8] {
        &self.mask[row * self.seq_len..(row + 1) * self.seq_len]
    }

    /// Pads encoded sequences to their longest member.
    pub fn from_seqs(seqs: &[TokenSeq], labels: Vec<Label>, indices: Vec<usize>) -> Self {
        let seq_len = seqs.iter().map(TokenSeq::len).max().unwrap_or(0);
        let mut ids = Vec::with_capacity(seqs.len() * seq_len);
        let mut mask = Vec::with_capacity(seqs.len() * seq_len);
        for s in seqs {
            ids.extend_from_slice(&s.ids);
            ids.extend(std::iter::repeat_n(PAD, seq_len - s.len()));
            mask.extend_from_slice(&s.attention_mask);
            mask.extend(std::iter::repeat_n(0, seq_len - s.len()));
        }
        Batch {
            ids,
            mask,
            labels,
            indices,
            batch_size: seqs.len(),
            seq_len,
        }
    }
}

/// Seeded permutation of `0..n`.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(seed));
    order
}

/// Shuffled, per-batch padded batches. Equal inputs and seed give equal streams.
pub fn batches(
    records: &[Record],
    vocab: &Vocab,
    batch_size: usize,
    seed: u64,
    max_len: usize,
) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let order = shuffled_order(records.len(), seed);
    order
        .chunks(batch_size)
        .map(|chunk| {
            let seqs: Vec<TokenSeq> = chunk
                .iter()
                .map(|&i| encode(&records[i].text, vocab, max_len))
                .collect();
            let labels = chunk.iter().map(|&i| records[i].label).collect();
            Batch::from_seqs(&seqs, labels, chunk.to_vec())
        })
        .collect()
}

/// Splits records into (human, machine).
pub fn split_by_label(records: &[Record]) -> (Vec<Record>, Vec<Record>) {
    records.iter().cloned().partition(|r| r.label == Label::Human)
}

/// Deterministic shuffle-then-cut split; `train_fraction` of records go first.
pub fn train_val_split(
    records: &[Record],
    train_fraction: f64,
    seed: u64,
) -> (Vec<Record>, Vec<Record>) {
    let order = shuffled_order(records.len(), seed);
    let cut = ((records.len() as f64) * train_fraction).round() as usize;
    let train = order[..cut].iter().map(|&i| records[i].clone()).collect();
    let val = order[cut..].iter().map(|&i| records[i].clone()).collect();
    (train, val)
}

/// Records whose generator appears in `held_out` versus the rest, for
/// unseen-generator evaluation.
pub fn held_out_generator_split(
    records: &[Record],
    held_out: &[&str],
) -> (Vec<Record>, Vec<Record>) {
    let held: BTreeSet<&str> = held_out.iter().copied().collect();
    let (out, rest): (Vec<Record>, Vec<Record>) = records
        .iter()
        .cloned()
        .partition(|r| held.contains(r.generator.as_str()));
    (rest, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(text: &str, label: Label, generator: &str, domain: &str) -> Record {
        Record::new("x", text, label, generator, domain).unwrap()
    }

    #[test]
    fn direct_field_mapping() {
        let recs = parse_jsonl(
            r#"{"text":"Hi","label":1,"model":"chatGPT","source":"reddit"}"#,
            &FieldMap::default(),
        )
        .unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].label, Label::Machine);
        assert_eq!(recs[0].generator, "chatGPT");
        assert_eq!(recs[0].domain, "reddit");
        assert_eq!(recs[0].id, "1");
    }

    #[test]
    fn empty_input_gives_no_records() {
        assert!(parse_jsonl("", &FieldMap::default()).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let content = "{\"text\":\"a\",\"label\":0,\"model\":\"human\",\"source\":\"x\"}\n{oops";
        match parse_jsonl(content, &FieldMap::default()) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_named() {
        let content = r#"{"text":"a","label":0,"source":"x"}"#;
        match parse_jsonl(content, &FieldMap::default()) {
            Err(Error::MissingField { line, field }) => {
                assert_eq!(line, 1);
                assert_eq!(field, "model");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let content = r#"{"text":"a","label":7,"model":"human","source":"x"}"#;
        assert!(matches!(
            parse_jsonl(content, &FieldMap::default()),
            Err(Error::InvalidRecord { line: 1, .. })
        ));
    }

    #[test]
    fn label_generator_mismatch_rejected() {
        let content = r#"{"text":"a","label":1,"model":"human","source":"x"}"#;
        assert!(parse_jsonl(content, &FieldMap::default()).is_err());
        let content = r#"{"text":"   ","label":0,"model":"human","source":"x"}"#;
        assert!(parse_jsonl(content, &FieldMap::default()).is_err());
    }

    #[test]
    fn remapped_fields_and_inverted_labels() {
        let fields = FieldMap {
            text: "body".into(),
            label: "y".into(),
            generator: "gen".into(),
            domain: "dom".into(),
            invert_labels: true,
            ..FieldMap::default()
        };
        let recs = parse_jsonl(
            r#"{"id":17,"body":"x","y":"0","gen":"dolly","dom":"arxiv"}"#,
            &fields,
        )
        .unwrap();
        assert_eq!(recs[0].label, Label::Machine);
        assert_eq!(recs[0].id, "17");
    }

    #[test]
    fn stats_small_grid() {
        let mut recs = Vec::new();
        for _ in 0..3 {
            recs.push(rec("t", Label::Machine, "chatGPT", "wikihow"));
        }
        for _ in 0..2 {
            recs.push(rec("t", Label::Human, "human", "wikihow"));
        }
        let s = corpus_stats(&recs);
        assert_eq!(s.count("chatGPT", "wikihow"), 3);
        assert_eq!(s.count("human", "wikihow"), 2);
        assert_eq!(s.count("dolly", "wikihow"), 0);
        assert_eq!(s.total, 5);
        assert_eq!(s.generators(), vec!["chatGPT", "human"]);
    }

    #[test]
    fn stats_of_nothing() {
        let s = corpus_stats(&[]);
        assert_eq!(s.total, 0);
        assert_eq!(s.count("chatGPT", "wikihow"), 0);
    }

    #[test]
    fn tokenizer_detaches_punctuation() {
        assert_eq!(tokenize("Don't stop."), vec!["don", "'", "t", "stop", "."]);
        assert_eq!(tokenize("  A  b\tC "), vec!["a", "b", "c"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn vocab_ranked_by_frequency() {
        let v = build_vocab(&[rec("a b a", Label::Human, "human", "d")], 10);
        assert!(v.id("a") < v.id("b"));
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("zzz"), UNK);
    }

    #[test]
    fn vocab_ties_lexicographic_and_truncated() {
        let v = build_vocab(&[rec("c b a d", Label::Human, "human", "d")], 6);
        assert_eq!(v.tokens(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn vocab_of_nothing_is_specials() {
        let v = build_vocab(&[], 10);
        assert_eq!(v.len(), 4);
        assert_eq!(v.token(CLS), Some("<cls>"));
    }

    #[test]
    fn encode_rules() {
        let v = build_vocab(&[rec("a b", Label::Human, "human", "d")], 10);
        let s = encode("", &v, 512);
        assert_eq!(s.ids, vec![CLS, SEP]);
        assert_eq!(s.original_length, 2);
        let s = encode("a b", &v, 512);
        assert_eq!(s.ids, vec![CLS, v.id("a"), v.id("b"), SEP]);
        let long = vec!["a"; 1000].join(" ");
        let s = encode(&long, &v, 512);
        assert_eq!(s.len(), 512);
        assert_eq!(s.ids[0], CLS);
        assert_eq!(s.ids[511], SEP);
        assert_eq!(s.original_length, 1002);
    }

    #[test]
    fn batch_sizes_and_padding() {
        let recs: Vec<Record> = ["a", "a b", "a b c", "b", "c c c c"]
            .iter()
            .map(|t| rec(t, Label::Human, "human", "d"))
            .collect();
        let v = build_vocab(&recs, 10);
        let bs = batches(&recs, &v, 2, 1, 512);
        assert_eq!(
            bs.iter().map(|b| b.batch_size).collect::<Vec<_>>(),
            vec![2, 2, 1]
        );
        for b in &bs {
            for r in 0..b.batch_size {
                let m = b.row_mask(r);
                let real = m.iter().filter(|&&x| x == 1).count();
                assert!(m[..real].iter().all(|&x| x == 1));
                assert!(b.row_ids(r)[real..].iter().all(|&x| x == PAD));
            }
        }
        assert_eq!(bs, batches(&recs, &v, 2, 1, 512));
        let a: Vec<usize> = bs.iter().flat_map(|b| b.indices.clone()).collect();
        let b: Vec<usize> = batches(&recs, &v, 2, 99, 512)
            .iter()
            .flat_map(|b| b.indices.clone())
            .collect();
        assert_ne!(a, b);
    }

    #[test]
    fn held_out_split_separates_generators() {
        let recs = vec![
            rec("a", Label::Machine, "bloomz", "d"),
            rec("a", Label::Machine, "dolly", "d"),
            rec("a", Label::Human, "human", "d"),
        ];
        let (train, held) = held_out_generator_split(&recs, &["bloomz"]);
        assert_eq!(train.len(), 2);
        assert_eq!(held.len(), 1);
        assert_eq!(held[0].generator, "bloomz");
    }
}
