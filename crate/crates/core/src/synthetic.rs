//! Generated corpora with known structure: a separable toy detection corpus
//! and the low/high-entropy pair used by the loss probe.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::corpus::{Label, Record, HUMAN};
use crate::rng::{self, derive_seed};

/// Token alphabet size for each class.
pub const CLASS_VOCAB: usize = 50;
pub const NUM_TEMPLATES: usize = 20;
pub const MACHINE_GENERATOR: &str = "template";
pub const DOMAIN: &str = "synthetic";

/// Templates do not depend on the caller's seed: "machine" text is a fixed
/// set of 20 sentences.
const TEMPLATE_SEED: u64 = 0x7e3a_11d0;

fn machine_token(i: usize) -> String {
    format!("m{i:02}")
}

fn human_token(i: usize) -> String {
    format!("h{i:02}")
}

/// The 20 fixed "machine" sentences, each 8 to 16 tokens over `m00..m49`.
pub fn machine_templates() -> Vec<String> {
    let mut r = rng::rng(TEMPLATE_SEED);
    (0..NUM_TEMPLATES)
        .map(|_| {
            let len = r.gen_range(8..=16);
            (0..len)
                .map(|_| machine_token(r.gen_range(0..CLASS_VOCAB)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn random_human_sentence(r: &mut rng::Rng) -> String {
    let len = r.gen_range(10..=30);
    (0..len)
        .map(|_| human_token(r.gen_range(0..CLASS_VOCAB)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n` records, alternating machine (template copies) and human (random
/// 10 to 30 token sequences over `h00..h49`). A bag-of-tokens rule separates
/// the classes perfectly.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<Record> {
    let templates = machine_templates();
    let mut r = rng::rng(derive_seed(seed, "toy-corpus"));
    (0..n)
        .map(|i| {
            let id = format!("toy-{i:05}");
            if i % 2 == 0 {
                let text = templates.choose(&mut r).expect("templates").clone();
                Record::new(id, text, Label::Machine, MACHINE_GENERATOR, DOMAIN)
            } else {
                Record::new(id, random_human_sentence(&mut r), Label::Human, HUMAN, DOMAIN)
            }
            .expect("generated records are valid")
        })
        .collect()
}

/// Human sentences for the probe. Each sentence draws its own mixing rate
/// (share of tokens borrowed from the machine alphabet) and repeat rate
/// (chance of copying the previous token), so per-sentence predictability
/// varies widely.
fn probe_human_sentence(r: &mut rng::Rng) -> String {
    let len = r.gen_range(10..=30);
    let mix: f64 = r.gen_range(0.0..1.0);
    let repeat: f64 = r.gen_range(0.0..0.8);
    let mut out: Vec<String> = Vec::with_capacity(len);
    for _ in 0..len {
        let tok = match out.last() {
            Some(prev) if r.gen_bool(repeat) => prev.clone(),
            _ if r.gen_bool(mix) => machine_token(r.gen_range(0..CLASS_VOCAB)),
            _ => human_token(r.gen_range(0..CLASS_VOCAB)),
        };
        out.push(tok);
    }
    out.join(" ")
}

/// Low-entropy machine and high-entropy human subsets for the loss probe,
/// `n` sentences each: `(human, machine)`.
pub fn probe_corpus(n: usize, seed: u64) -> (Vec<Record>, Vec<Record>) {
    let templates = machine_templates();
    let mut r = rng::rng(derive_seed(seed, "probe-corpus"));
    let mut human = Vec::with_capacity(n);
    let mut machine = Vec::with_capacity(n);
    for i in 0..n {
        human.push(
            Record::new(format!("ph-{i:05}"), probe_human_sentence(&mut r), Label::Human, HUMAN, DOMAIN)
                .expect("valid"),
        );
        let text = templates.choose(&mut r).expect("templates").clone();
        machine.push(
            Record::new(format!("pm-{i:05}"), text, Label::Machine, MACHINE_GENERATOR, DOMAIN)
                .expect("valid"),
        );
    }
    (human, machine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn templates_are_fixed_and_sized() {
        let t = machine_templates();
        assert_eq!(t.len(), NUM_TEMPLATES);
        assert_eq!(t, machine_templates());
        for s in &t {
            let n = tokenize(s).len();
            assert!((8..=16).contains(&n));
        }
    }

    #[test]
    fn toy_corpus_is_separable_by_alphabet() {
        let recs = toy_corpus(200, 3);
        assert_eq!(recs, toy_corpus(200, 3));
        assert_eq!(recs.iter().filter(|r| r.label == Label::Machine).count(), 100);
        for r in &recs {
            let toks = tokenize(&r.text);
            let machine = toks.iter().all(|t| t.starts_with('m'));
            let human = toks.iter().all(|t| t.starts_with('h'));
            assert_eq!(machine, r.label == Label::Machine);
            assert_eq!(human, r.label == Label::Human);
            if human {
                assert!((10..=30).contains(&toks.len()));
            }
        }
    }

    #[test]
    fn probe_corpus_shapes() {
        let (h, m) = probe_corpus(50, 1);
        assert_eq!((h.len(), m.len()), (50, 50));
        assert!(h.iter().all(|r| r.label == Label::Human));
        assert!(m.iter().all(|r| r.label == Label::Machine));
        let templates = machine_templates();
        assert!(m.iter().all(|r| templates.contains(&r.text)));
    }
}
