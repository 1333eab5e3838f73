//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use clipvqa::head::{forward_with_masks, loss, DropoutMasks, GatedHeadParams, LossWeights};
use clipvqa::ingest::AnnotatedSample;
use clipvqa::train::TrainExample;
use clipvqa::vocab::{AnswerType, ScoreMode, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central differences of the total loss for every scalar parameter.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference(
    params: &GatedHeadParams,
    image: &[f64],
    text: &[f64],
    masks: Option<&DropoutMasks>,
    class: usize,
    answer_type: usize,
    weights: &LossWeights,
    delta: f64,
) -> GatedHeadParams {
    let eval = |p: &GatedHeadParams| {
        let tr = forward_with_masks(p, image, text, masks.cloned()).unwrap();
        loss(&tr, class, answer_type, weights).unwrap().total
    };
    let mut out = params.zeros_like();
    let mut probe = params.clone();
    let n_tensors = params.tensors().len();
    for t in 0..n_tensors {
        let len = params.tensors()[t].len();
        for i in 0..len {
            let orig = params.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + delta;
            let up = eval(&probe);
            probe.tensors_mut()[t][i] = orig - delta;
            let down = eval(&probe);
            probe.tensors_mut()[t][i] = orig;
            out.tensors_mut()[t][i] = (up - down) / (2.0 * delta);
        }
    }
    out
}

/// Relative error with a small absolute floor for gradients that are
/// numerically zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between two gradient structures, with the name of
/// the offending tensor.
pub fn max_relative_error(a: &GatedHeadParams, b: &GatedHeadParams) -> (f64, String) {
    let names = a.tensor_names();
    let mut worst = (0.0, String::new());
    for ((ta, tb), name) in a.tensors().iter().zip(b.tensors()).zip(names) {
        for (x, y) in ta.iter().zip(tb) {
            let e = relative_error(*x, *y);
            if e > worst.0 {
                worst = (e, name.clone());
            }
        }
    }
    worst
}

/// Fills every parameter (including biases and layer-norm terms) with
/// uniform noise so all gradient paths are exercised.
pub fn randomize(params: &mut GatedHeadParams, rng: &mut ChaCha8Rng, scale: f64) {
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
    for g in params.ln_in.gamma.iter_mut().chain(params.ln_hidden.gamma.iter_mut()) {
        *g = 1.0 + rng.gen_range(-0.5..0.5);
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

// ---------------------------------------------------------------------------
// vocabulary oracle

/// Full-matrix edit distance over chars.
pub fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Score numerator over a common denominator so ties compare exactly:
/// simple = min(m,3) / 3, leave-one-out = Σ_subsets min(m',3) / (3n).
fn oracle_score(candidate: &str, crowd: &[String], mode: ScoreMode) -> (usize, usize) {
    let m = crowd.iter().filter(|c| *c == candidate).count();
    match mode {
        ScoreMode::Simple => (m.min(3), 3),
        ScoreMode::LeaveOneOut => {
            let mut num = 0;
            for skip in 0..crowd.len() {
                let ms = crowd
                    .iter()
                    .enumerate()
                    .filter(|&(i, c)| i != skip && c == candidate)
                    .count();
                num += ms.min(3);
            }
            (num, 3 * crowd.len())
        }
    }
}

pub fn oracle_select(crowd: &[String], freq: &BTreeMap<String, u64>, mode: ScoreMode) -> String {
    let unique: BTreeSet<String> = crowd.iter().cloned().collect();
    // every candidate shares the denominator, so compare numerators
    let best_score = unique.iter().map(|u| oracle_score(u, crowd, mode).0).max().unwrap();
    let tied: Vec<String> = unique
        .into_iter()
        .filter(|u| oracle_score(u, crowd, mode).0 == best_score)
        .collect();
    let best_freq = tied.iter().map(|u| freq.get(u).copied().unwrap_or(0)).max().unwrap();
    let tied: Vec<String> = tied
        .into_iter()
        .filter(|u| freq.get(u).copied().unwrap_or(0) == best_freq)
        .collect();
    let mut ranked: Vec<(usize, String)> = tied
        .iter()
        .map(|u| (tied.iter().map(|o| dp_levenshtein(u, o)).sum(), u.clone()))
        .collect();
    ranked.sort();
    ranked[0].1.clone()
}

/// Brute-force vocabulary: (sorted classes, per-sample target answer).
pub fn oracle_vocabulary(samples: &[AnnotatedSample], mode: ScoreMode) -> (Vec<String>, Vec<String>) {
    let mut freq = BTreeMap::new();
    for s in samples {
        for a in &s.answers {
            *freq.entry(a.clone()).or_insert(0u64) += 1;
        }
    }
    let targets: Vec<String> = samples.iter().map(|s| oracle_select(&s.answers, &freq, mode)).collect();
    let classes: Vec<String> = targets.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    (classes, targets)
}

pub fn sample(id: &str, answers: Vec<String>) -> AnnotatedSample {
    AnnotatedSample {
        sample_id: id.into(),
        question: "q".into(),
        answers,
        answerable: true,
        answerable_labeled: true,
    }
}

/// Random instance with at most six distinct, already-normalized answers
/// drawn from near-identical strings; crowd counts are biased towards
/// 3/3/3/1-style ties so every tie-break stage is reached.
pub fn random_vocab_instance(rng: &mut ChaCha8Rng) -> Vec<AnnotatedSample> {
    const POOL: [&str; 9] = ["ab", "ac", "ad", "abc", "b", "ba", "bab", "yes", "no"];
    const SHAPES: [&[usize]; 8] = [
        &[3, 3, 3, 1],
        &[3, 3, 4],
        &[5, 5],
        &[2, 2, 2, 2, 2],
        &[10],
        &[4, 3, 3],
        &[2, 2, 2, 2, 1, 1],
        &[1, 1, 1, 1, 3, 3],
    ];
    let mut words: Vec<&str> = POOL.to_vec();
    for i in (1..words.len()).rev() {
        words.swap(i, rng.gen_range(0..=i));
    }
    let distinct = rng.gen_range(2..=6);
    let words = &words[..distinct];
    let n = rng.gen_range(1..=5);
    (0..n)
        .map(|i| {
            let shape = SHAPES[rng.gen_range(0..SHAPES.len())];
            let mut answers = Vec::with_capacity(10);
            for (slot, &count) in shape.iter().enumerate() {
                let w = words[(slot + rng.gen_range(0..distinct)) % distinct];
                answers.extend(std::iter::repeat_n(w.to_string(), count));
            }
            for k in (1..answers.len()).rev() {
                answers.swap(k, rng.gen_range(0..=k));
            }
            sample(&format!("s{i}"), answers)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// synthetic training task

/// 3 classes, 2 types, 8+8 dims. Class k lifts coordinate k by 3 over
/// U(-1, 1) noise, so the arg-max over the first three coordinates separates
/// the classes with margin ≥ 1 (and layer norm preserves that ordering).
pub fn synthetic_task(n: usize, seed: u64) -> (Vec<TrainExample>, Vocabulary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n)
        .map(|i| {
            let class = i % 3;
            let mut x: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            x[class] += 3.0;
            TrainExample {
                sample_id: format!("syn_{i}"),
                image_variants: vec![x[..8].to_vec()],
                text: x[8..].to_vec(),
                target_class: class,
                target_type: usize::from(class == 2),
            }
        })
        .collect();
    (data, synthetic_vocab())
}

pub fn synthetic_vocab() -> Vocabulary {
    Vocabulary::from_parts(
        vec!["a".into(), "b".into(), "c".into()],
        vec![AnswerType(0), AnswerType(0), AnswerType(1)],
        vec!["letter".into(), "last".into()],
        Default::default(),
        ScoreMode::Simple,
        "synthetic".into(),
    )
    .unwrap()
}

/// Small, quick configuration for the synthetic task.
pub fn synthetic_config(epochs: usize, seed: u64) -> clipvqa::train::TrainConfig {
    clipvqa::train::TrainConfig {
        learning_rate: 5e-3,
        batch_size: 16,
        epochs,
        dropout_rate: 0.1,
        seed,
        hidden_dims: vec![32],
        ..Default::default()
    }
}

pub fn bits(params: &GatedHeadParams) -> Vec<u64> {
    params.tensors().iter().flat_map(|t| t.iter().map(|x| x.to_bits())).collect()
}

/// The synthetic task expressed as annotated samples joined with f32
/// features: class k is answered "a"/"b"/"c" by all ten annotators.
pub fn synthetic_split(
    n: usize,
    seed: u64,
) -> (Vec<AnnotatedSample>, Vec<clipvqa::ingest::JoinedSample>) {
    use clipvqa::ingest::{FeatureRecord, JoinedSample};
    let (data, _) = synthetic_task(n, seed);
    let letters = ["a", "b", "c"];
    let mut samples = Vec::with_capacity(n);
    let mut joined = Vec::with_capacity(n);
    for ex in data {
        let mut s = sample(&ex.sample_id, vec![letters[ex.target_class].to_string(); 10]);
        s.answerable_labeled = true;
        s.answerable = ex.target_class != 2;
        let narrow = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        joined.push(JoinedSample {
            sample: s.clone(),
            image: vec![FeatureRecord { key: ex.sample_id.clone(), variant: 0, vector: narrow(&ex.image_variants[0]) }],
            text: FeatureRecord { key: ex.sample_id.clone(), variant: 0, vector: narrow(&ex.text) },
        });
        samples.push(s);
    }
    (samples, joined)
}

/// Non-interpolated AP by direct enumeration: rank by descending score with
/// earlier items first among equals, average precision@k over positives.
pub fn oracle_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let positives = labels.iter().filter(|&&l| l).count();
    let mut hits = 0;
    let mut sum = 0.0;
    for (rank, &i) in idx.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    sum / positives as f64
}
