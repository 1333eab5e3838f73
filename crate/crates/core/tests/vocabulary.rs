mod common;

use std::collections::HashMap;
use std::path::Path;

use clipvqa::ingest::{parse_annotations, ParseMode};
use clipvqa::vocab::{
    build_vocabulary, levenshtein, select_target_answer, vqa_score, ScoreMode, TypeScheme,
    VocabOptions,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{dp_levenshtein, oracle_vocabulary, random_vocab_instance};

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Hand-derived expectations, cross-checked against the brute-force oracle:
///  1: yes×5 / no×3 tie on score, global "no" (7) beats "yes" (5)
///  2: no / nope / n0 tie on score, "no" most frequent
///  3: red / read / bed tie on score and frequency, medoid "red" (sums 2, 3, 3)
///  4: ab / ac / ad all tied everywhere, lexicographic "ab"
///  5: "2" / "two" tied everywhere (distance 3 each way), lexicographic "2"
#[test]
fn five_sample_fixture() {
    let samples = parse_annotations(&fixture("vocab5.json"), ParseMode::default()).unwrap();
    let (vocab, targets) = build_vocabulary(&samples, &VocabOptions::default()).unwrap();
    assert_eq!(vocab.classes(), &["2", "ab", "no", "red"]);
    let types: Vec<&str> = (0..vocab.len())
        .map(|c| vocab.type_names()[vocab.class_type(c).0].as_str())
        .collect();
    assert_eq!(types, ["number", "other", "no", "color"]);
    let t: Vec<usize> = targets.values().copied().collect();
    assert_eq!(t, [2, 2, 3, 1, 0]);
    assert_eq!(vocab.global_freq()["no"], 7);
    assert_eq!(vocab.global_freq()["two"], 5);
    assert_eq!(vocab.rule_table_hash(), TypeScheme::default().rule_table_hash());

    let normalized: Vec<_> = samples
        .iter()
        .map(|s| {
            let answers = s.answers.iter().map(|a| clipvqa::normalize_answer(a)).collect();
            common::sample(&s.sample_id, answers)
        })
        .collect();
    let (classes, oracle_targets) = oracle_vocabulary(&normalized, ScoreMode::Simple);
    assert_eq!(vocab.classes(), classes.as_slice());
    let named: Vec<&str> = t.iter().map(|&i| vocab.classes()[i].as_str()).collect();
    assert_eq!(named, oracle_targets);
}

#[test]
fn leave_one_out_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let options = VocabOptions {
        score_mode: ScoreMode::LeaveOneOut,
        ..Default::default()
    };
    for _ in 0..200 {
        let samples = random_vocab_instance(&mut rng);
        let (vocab, targets) = build_vocabulary(&samples, &options).unwrap();
        let (classes, expected) = oracle_vocabulary(&samples, ScoreMode::LeaveOneOut);
        assert_eq!(vocab.classes(), classes.as_slice());
        let got: Vec<&str> = targets.values().map(|&i| vocab.classes()[i].as_str()).collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let samples = random_vocab_instance(&mut rng);
        let (vocab, targets) = build_vocabulary(&samples, &VocabOptions::default()).unwrap();
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut rng);
        let (vocab2, targets2) = build_vocabulary(&shuffled, &VocabOptions::default()).unwrap();
        assert_eq!(vocab.classes(), vocab2.classes());
        assert_eq!(vocab.hash(), vocab2.hash());
        for (id, class) in &targets {
            assert_eq!(targets2[id], *class);
        }
    }
}

#[test]
fn simple_score_monotone_and_saturating() {
    let mut last = 0.0;
    for m in 0..=10 {
        let crowd: Vec<&str> = (0..10).map(|i| if i < m { "a" } else { "b" }).collect();
        let s = vqa_score("a", &crowd, ScoreMode::Simple).unwrap();
        assert!(s >= last);
        if m >= 3 {
            assert_eq!(s, 1.0);
        }
        last = s;
    }
}

fn short_string() -> impl Strategy<Value = String> {
    "[abcü]{0,7}"
}

proptest! {
    #[test]
    fn levenshtein_metric(a in short_string(), b in short_string(), c in short_string()) {
        let ab = levenshtein(&a, &b);
        prop_assert_eq!(ab, levenshtein(&b, &a));
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
        prop_assert_eq!(ab, dp_levenshtein(&a, &b));
    }

    #[test]
    fn selection_returns_a_crowd_answer(
        crowd in prop::collection::vec("[ab]{1,2}", 1..12),
        freqs in prop::collection::vec(0u64..4, 6),
        loo in any::<bool>(),
    ) {
        let keys = ["a", "b", "aa", "ab", "ba", "bb"];
        let freq: HashMap<String, u64> = keys.iter().zip(&freqs).map(|(k, f)| (k.to_string(), *f)).collect();
        let mode = if loo { ScoreMode::LeaveOneOut } else { ScoreMode::Simple };
        let picked = select_target_answer(&crowd, &freq, mode).unwrap();
        prop_assert!(crowd.contains(&picked));
    }

    #[test]
    fn type_assignment_total(answer in "\\PC{0,12}") {
        let scheme = TypeScheme::default();
        let t = scheme.assign(&answer);
        prop_assert!(t.0 < scheme.len());
        prop_assert_eq!(t, scheme.assign(&answer));
    }
}
