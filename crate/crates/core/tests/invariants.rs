use std::collections::BTreeSet;

use mgt_detect::corpus::{batches, build_vocab, encode, train_val_split, Label, Record};
use mgt_detect::eval::{evaluate, with_commas};
use mgt_detect::numerics::{softmax_rows, Tensor};
use mgt_detect::pipeline::{checkpoint_bytes, checkpoint_from_bytes, variant_spec, Model, Overrides, Preset, VariantName};
use mgt_detect::rng::derive_seed;
use mgt_detect::synthetic::toy_corpus;
use proptest::prelude::*;

fn records(texts: &[String]) -> Vec<Record> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (label, generator) = if i % 3 == 0 { (Label::Machine, "gen") } else { (Label::Human, "human") };
            Record::new(format!("r{i}"), t.clone(), label, generator, "d").unwrap()
        })
        .collect()
}

fn texts() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,12}", 0..40)
}

proptest! {
    #[test]
    fn split_is_a_partition(ts in texts(), frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let recs = records(&ts);
        let (tr, va) = train_val_split(&recs, frac, seed);
        prop_assert_eq!(tr.len() + va.len(), recs.len());
        prop_assert_eq!(tr.len(), (recs.len() as f64 * frac).round() as usize);
        let ids: BTreeSet<_> = tr.iter().chain(&va).map(|r| r.id.clone()).collect();
        prop_assert_eq!(ids.len(), recs.len());
        prop_assert_eq!(train_val_split(&recs, frac, seed), (tr, va));
    }

    #[test]
    fn batches_visit_every_record_once(ts in texts(), bs in 1usize..9, max_len in 2usize..10, seed in any::<u64>()) {
        let recs = records(&ts);
        let vocab = build_vocab(&recs, 50);
        let bs_out = batches(&recs, &vocab, bs, seed, max_len);
        let mut seen: Vec<usize> = bs_out.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..recs.len()).collect::<Vec<_>>());
        for b in &bs_out {
            prop_assert!(b.batch_size <= bs && b.seq_len <= max_len);
            for row in 0..b.batch_size {
                let mask = b.row_mask(row);
                let real = mask.iter().filter(|&&m| m == 1).count();
                prop_assert!(mask[..real].iter().all(|&m| m == 1));
                prop_assert!(b.row_ids(row)[real..].iter().all(|&id| id == 0));
                prop_assert_eq!(b.labels[row], recs[b.indices[row]].label);
            }
        }
    }

    #[test]
    fn encoding_respects_max_len(t in "[a-z]{1,5}( [a-z ]{0,8}){0,10}", max_len in 0usize..20) {
        let vocab = build_vocab(&records(std::slice::from_ref(&t)), 100);
        let seq = encode(&t, &vocab, max_len);
        prop_assert!(seq.len() >= 2 && seq.len() <= max_len.max(2));
        prop_assert!(seq.original_length >= seq.len());
        prop_assert_eq!(seq.attention_mask.len(), seq.len());
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..5, cols in 1usize..6, vals in prop::collection::vec(-50.0f64..50.0, 30)) {
        let t = Tensor::from_vec(&[rows, cols], vals[..rows * cols].to_vec()).unwrap();
        let p = softmax_rows(&t);
        for r in p.data().chunks(cols) {
            prop_assert!(r.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_stay_in_the_unit_interval(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..100)) {
        let lab = |b: bool| if b { Label::Machine } else { Label::Human };
        let pred: Vec<_> = pairs.iter().map(|p| lab(p.0)).collect();
        let gold: Vec<_> = pairs.iter().map(|p| lab(p.1)).collect();
        let m = evaluate(&pred, &gold).unwrap();
        for v in [m.accuracy, m.f1_macro, m.precision_macro, m.recall_macro, m.machine.f1, m.human.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(m.confusion.total(), pairs.len());
    }

    #[test]
    fn commas_round_trip(n in any::<u32>()) {
        let s = with_commas(n as usize);
        prop_assert_eq!(s.replace(',', "").parse::<u32>().unwrap(), n);
        prop_assert!(s.split(',').skip(1).all(|g| g.len() == 3));
    }

    #[test]
    fn derived_seeds_are_stable(root in any::<u64>(), a in "[a-z]{1,8}", b in "[a-z]{1,8}") {
        prop_assert_eq!(derive_seed(root, &a), derive_seed(root, &a));
        if a != b {
            prop_assert_ne!(derive_seed(root, &a), derive_seed(root, &b));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn checkpoints_round_trip_for_any_seed(seed in any::<u64>(), which in 0usize..6) {
        let name = VariantName::ALL[which];
        let recs = toy_corpus(20, seed);
        let spec = variant_spec(name, Preset::Desk, &Overrides::default()).unwrap();
        let model = Model::for_training(spec, &recs, seed).unwrap();
        let bytes = checkpoint_bytes(&model).unwrap();
        let back = checkpoint_from_bytes(&bytes).unwrap();
        prop_assert_eq!(checkpoint_bytes(&back).unwrap(), bytes);
        let texts: Vec<String> = recs.iter().map(|r| r.text.clone()).collect();
        let (a, b) = (model.predict(&texts).unwrap(), back.predict(&texts).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.prob_machine.to_bits(), y.prob_machine.to_bits());
            prop_assert!((0.0..=1.0).contains(&x.prob_machine));
        }
    }
}
