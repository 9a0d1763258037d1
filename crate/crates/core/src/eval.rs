//! Confusion-matrix metrics and comparison reports.
//!
//! Class 1 (machine) is the positive class. Both per-class and macro
//! averages are always computed; a 0/0 ratio is reported as 0 and named in
//! [`Metrics::degenerate`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Same predictions with the class names exchanged.
    pub fn swapped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<Confusion> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            op: "confusion",
            left: vec![predictions.len()],
            right: vec![labels.len()],
        });
    }
    if predictions.is_empty() {
        return Err(Error::Input("no predictions to evaluate".into()));
    }
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (Label::Machine, Label::Machine) => c.tp += 1,
            (Label::Machine, Label::Human) => c.fp += 1,
            (Label::Human, Label::Human) => c.tn += 1,
            (Label::Human, Label::Machine) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Precision, recall and F1 for one class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub human: ClassMetrics,
    pub machine: ClassMetrics,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    /// Ratios whose denominator was zero, e.g. `"precision_human"`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize, class: &str, flags: &mut Vec<String>) -> ClassMetrics {
    let precision = ratio(tp, tp + fp, &format!("precision_{class}"), flags);
    let recall = ratio(tp, tp + fn_, &format!("recall_{class}"), flags);
    let f1 = if precision + recall == 0.0 {
        flags.push(format!("f1_{class}"));
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics { precision, recall, f1 }
}

pub fn metrics(c: &Confusion) -> Metrics {
    let mut flags = Vec::new();
    let accuracy = ratio(c.tp + c.tn, c.total(), "accuracy", &mut flags);
    let human = class_metrics(c.tn, c.fn_, c.fp, "human", &mut flags);
    let machine = class_metrics(c.tp, c.fp, c.fn_, "machine", &mut flags);
    Metrics {
        confusion: *c,
        accuracy,
        human,
        machine,
        precision_macro: (human.precision + machine.precision) / 2.0,
        recall_macro: (human.recall + machine.recall) / 2.0,
        f1_macro: (human.f1 + machine.f1) / 2.0,
        degenerate: flags,
    }
}

/// Confusion and metrics in one call.
pub fn evaluate(predictions: &[Label], labels: &[Label]) -> Result<Metrics> {
    confusion(predictions, labels).map(|c| metrics(&c))
}

/// Thousands-separated count with a rounded millions hint, e.g.
/// `3,675,138 (≈4M)` or `738,818 (≈0.7M)`.
pub fn format_params(n: usize) -> String {
    format!("{} (≈{})", with_commas(n), rounded_params(n))
}

/// Round-half-up: whole millions from 1M, tenths of a million from 100K,
/// thousands below that.
pub fn rounded_params(n: usize) -> String {
    if n >= 1_000_000 {
        format!("{}M", (n + 500_000) / 1_000_000)
    } else if n >= 100_000 {
        let tenths = (n + 50_000) / 100_000;
        if tenths == 10 {
            "1M".to_string()
        } else {
            format!("0.{tenths}M")
        }
    } else if n >= 1_000 {
        format!("{}K", (n + 500) / 1_000)
    } else {
        n.to_string()
    }
}

pub fn with_commas(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// One row of a comparison report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub metrics: Metrics,
    pub trainable_params: usize,
}

/// The JSON form of a [`ReportRow`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub model: String,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_pos: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub trainable_params: usize,
}

impl From<&ReportRow> for ReportEntry {
    fn from(r: &ReportRow) -> Self {
        let m = &r.metrics;
        ReportEntry {
            model: r.model.clone(),
            accuracy: m.accuracy,
            f1_macro: m.f1_macro,
            f1_pos: m.machine.f1,
            precision_pos: m.machine.precision,
            recall_pos: m.machine.recall,
            precision_macro: m.precision_macro,
            recall_macro: m.recall_macro,
            trainable_params: r.trainable_params,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
}

const HEADERS: [&str; 9] = [
    "Model",
    "Accuracy",
    "F1 (macro)",
    "F1 (pos)",
    "Precision (pos)",
    "Recall (pos)",
    "Precision (macro)",
    "Recall (macro)",
    "Params*",
];

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Rows in input order. Metric columns are percentages to two decimals.
pub fn report(rows: &[ReportRow], format: Format) -> String {
    match format {
        Format::Json => {
            let entries: Vec<ReportEntry> = rows.iter().map(ReportEntry::from).collect();
            let mut s = serde_json::to_string_pretty(&entries).expect("serializable");
            s.push('\n');
            s
        }
        Format::Table => {
            let body: Vec<[String; 9]> = rows
                .iter()
                .map(|r| {
                    let m = &r.metrics;
                    [
                        r.model.clone(),
                        pct(m.accuracy),
                        pct(m.f1_macro),
                        pct(m.machine.f1),
                        pct(m.machine.precision),
                        pct(m.machine.recall),
                        pct(m.precision_macro),
                        pct(m.recall_macro),
                        format_params(r.trainable_params),
                    ]
                })
                .collect();
            render_columns(&HEADERS, &body)
        }
    }
}

/// Left-aligned first column, right-aligned rest.
pub(crate) fn render_columns<const N: usize>(headers: &[&str; N], rows: &[[String; N]]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - cell.chars().count();
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    writeln!(out, "{}", line(headers.to_vec())).unwrap();
    let rule: usize = widths.iter().sum::<usize>() + 2 * (N - 1);
    writeln!(out, "{}", "-".repeat(rule)).unwrap();
    for row in rows {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect())).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_index(b as usize).unwrap()).collect()
    }

    #[test]
    fn basic_confusions() {
        let y = labels(&[1, 0, 1]);
        let c = confusion(&y, &y).unwrap();
        assert_eq!(c, Confusion { tp: 2, fp: 0, tn: 1, fn_: 0 });
        let flipped = labels(&[0, 1, 0]);
        let c = confusion(&flipped, &y).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion(&y, &y[..2]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let m = metrics(&Confusion { tp: 3, fp: 0, tn: 4, fn_: 0 });
        for v in [m.accuracy, m.f1_macro, m.precision_macro, m.recall_macro, m.machine.f1, m.human.f1] {
            assert_eq!(v, 1.0);
        }
        assert!(m.degenerate.is_empty());
    }

    #[test]
    fn table3_shaped_instance() {
        let m = metrics(&Confusion { tp: 50, fn_: 2, fp: 17, tn: 31 });
        assert_eq!(format!("{:.4}", m.machine.precision), "0.7463");
        assert_eq!(format!("{:.4}", m.machine.recall), "0.9615");
        assert_eq!(m.accuracy, 0.81);
    }

    #[test]
    fn degenerate_denominators_are_flagged() {
        let m = metrics(&Confusion { tp: 1, fp: 0, tn: 0, fn_: 0 });
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.human.precision, 0.0);
        assert_eq!(m.human.recall, 0.0);
        assert!(m.degenerate.contains(&"precision_human".to_string()));
        assert!(m.degenerate.contains(&"recall_human".to_string()));
    }

    #[test]
    fn param_formatting() {
        assert_eq!(format_params(3_675_138), "3,675,138 (≈4M)");
        assert_eq!(format_params(2_756_610), "2,756,610 (≈3M)");
        assert_eq!(format_params(17_850_882), "17,850,882 (≈18M)");
        assert_eq!(rounded_params(737_280), "0.7M");
        assert_eq!(rounded_params(124_055_810), "124M");
        assert_eq!(rounded_params(1_538), "2K");
        assert_eq!(rounded_params(999_999), "1M");
        assert_eq!(with_commas(0), "0");
        assert_eq!(with_commas(1000), "1,000");
    }

    #[test]
    fn empty_report_has_header_only() {
        let t = report(&[], Format::Table);
        assert_eq!(t.lines().count(), 2);
        assert!(t.starts_with("Model"));
        assert_eq!(report(&[], Format::Json).trim(), "[]");
    }

    #[test]
    fn json_report_round_trips() {
        let rows = vec![ReportRow {
            model: "bilstm_frozen".into(),
            metrics: metrics(&Confusion { tp: 50, fn_: 2, fp: 17, tn: 31 }),
            trainable_params: 3_675_138,
        }];
        let parsed: Vec<ReportEntry> = serde_json::from_str(&report(&rows, Format::Json)).unwrap();
        assert_eq!(parsed, vec![ReportEntry::from(&rows[0])]);
        let table = report(&rows, Format::Table);
        assert!(table.contains("3,675,138 (≈4M)"));
        assert!(table.contains("74.63"));
    }

    proptest! {
        #[test]
        fn swapping_classes_swaps_per_class(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let c = Confusion { tp, fp, tn, fn_ };
            let a = metrics(&c);
            let b = metrics(&c.swapped());
            prop_assert_eq!(a.human, b.machine);
            prop_assert_eq!(a.machine, b.human);
            prop_assert_eq!(a.accuracy, b.accuracy);
            prop_assert!((a.f1_macro - b.f1_macro).abs() < 1e-15);
            prop_assert_eq!(a.f1_macro, (a.human.f1 + a.machine.f1) / 2.0);
            for v in [a.accuracy, a.f1_macro, a.machine.f1, a.human.f1, a.precision_macro, a.recall_macro] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
