use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::head::{predict, AnswerabilityPolicy, AnswerabilityPolicyKind, Checkpoint};
use crate::ingest::{AnnotatedSample, JoinedSample};
use crate::vocab::{normalize_answer, select_target_answer, vqa_score, ScoreMode, TypeScheme, Vocabulary};

use super::ensemble::{ensemble_predict, EnsembleMode};
use super::metrics::average_precision;

/// Which label counts as positive for answerability AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveClass {
    #[default]
    Answerable,
    Unanswerable,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub score_mode: ScoreMode,
    pub policy: AnswerabilityPolicyKind,
    pub ensemble: EnsembleMode,
    pub weights: Option<Vec<f64>>,
    pub positive_class: PositiveClass,
    /// Rules used to bucket samples for the per-type breakdown.
    pub scheme: TypeScheme,
    pub top_k: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            score_mode: ScoreMode::Simple,
            policy: AnswerabilityPolicyKind::Type,
            ensemble: EnsembleMode::ProbabilityMean,
            weights: None,
            positive_class: PositiveClass::Answerable,
            scheme: TypeScheme::default(),
            top_k: 5,
        }
    }
}

/// Per-sample output of a model or ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub answer: String,
    /// Highest-probability classes, best first.
    pub top_k: Vec<(String, f64)>,
    pub answerability: f64,
}

#[derive(Serialize)]
struct SubmissionEntry<'a> {
    image: &'a str,
    answer: &'a str,
    answerability: f64,
}

/// Writes the challenge submission shape:
/// `[{"image": ..., "answer": ..., "answerability": ...}]`.
pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let entries: Vec<SubmissionEntry> = predictions
        .iter()
        .map(|p| SubmissionEntry {
            image: &p.sample_id,
            answer: &p.answer,
            answerability: p.answerability,
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("predictions serialize");
    text.push('\n');
    fsutil::write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean VQA score over samples that carry crowd answers.
    pub vqa_accuracy: Option<f64>,
    pub answerability_ap: Option<f64>,
    /// Why `answerability_ap` is absent, when it is.
    pub answerability_note: Option<String>,
    pub per_type_accuracy: BTreeMap<String, f64>,
    pub per_type_count: BTreeMap<String, usize>,
    pub sample_count: usize,
    pub scored_count: usize,
    pub skipped_count: usize,
    pub model_count: usize,
    pub score_mode: ScoreMode,
    pub positive_class: PositiveClass,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One ensemble member together with the split joined against its own
/// feature files (members may use different encoders).
#[derive(Debug, Clone, Copy)]
pub struct ModelSplit<'a> {
    pub checkpoint: &'a Checkpoint,
    pub joined: &'a [JoinedSample],
}

fn check_checkpoint(ck: &Checkpoint, vocab: &Vocabulary) -> Result<()> {
    if ck.meta.vocab_hash != vocab.hash() {
        return Err(Error::VocabularyMismatch(format!(
            "checkpoint was trained against vocabulary {}, supplied vocabulary is {}",
            ck.meta.vocab_hash,
            vocab.hash()
        )));
    }
    if ck.params.arch.num_answers != vocab.len() || ck.meta.type_names != vocab.type_names() {
        return Err(Error::VocabularyMismatch(
            "checkpoint outputs do not match the vocabulary layout".into(),
        ));
    }
    Ok(())
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Ensembled predictions for every sample that all members can see, in
/// annotation order, plus the ids of the samples that had to be skipped.
pub fn predict_split(
    models: &[ModelSplit],
    samples: &[AnnotatedSample],
    vocab: &Vocabulary,
    options: &EvalOptions,
) -> Result<(Vec<Prediction>, Vec<String>)> {
    if models.is_empty() {
        return Err(Error::validation("no checkpoints to evaluate"));
    }
    for m in models {
        check_checkpoint(m.checkpoint, vocab)?;
    }
    let policy = AnswerabilityPolicy::resolve(options.policy, vocab.type_names(), vocab.classes());
    let indexed: Vec<HashMap<&str, &JoinedSample>> = models
        .iter()
        .map(|m| m.joined.iter().map(|j| (j.sample.sample_id.as_str(), j)).collect())
        .collect();

    let mut present = Vec::new();
    let mut skipped = Vec::new();
    for s in samples {
        let id = s.sample_id.as_str();
        let members: Option<Vec<&JoinedSample>> = indexed.iter().map(|ix| ix.get(id).copied()).collect();
        match members {
            Some(m) => present.push((s, m)),
            None => skipped.push(s.sample_id.clone()),
        }
    }

    let predictions = present
        .par_iter()
        .map(|(sample, members)| {
            let outputs = models
                .iter()
                .zip(members)
                .map(|(m, j)| {
                    predict(
                        &m.checkpoint.params,
                        &widen(&j.image_canonical().vector),
                        &widen(&j.text.vector),
                        &policy,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let combined = ensemble_predict(&outputs, options.weights.as_deref(), options.ensemble)?;
            let mut ranked: Vec<usize> = (0..combined.answer_probs.len()).collect();
            ranked.sort_by(|&a, &b| {
                combined.answer_probs[b]
                    .partial_cmp(&combined.answer_probs[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let top_k = ranked
                .iter()
                .take(options.top_k)
                .map(|&i| (vocab.classes()[i].clone(), combined.answer_probs[i]))
                .collect();
            Ok(Prediction {
                sample_id: sample.sample_id.clone(),
                answer: vocab.classes()[combined.answer_index].clone(),
                top_k,
                answerability: combined.answerability.clamp(0.0, 1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((predictions, skipped))
}

/// Predicts the split and scores it. VQA accuracy needs crowd answers; AP
/// needs answerability labels with at least one positive.
pub fn evaluate(
    models: &[ModelSplit],
    samples: &[AnnotatedSample],
    vocab: &Vocabulary,
    options: &EvalOptions,
) -> Result<(EvalReport, Vec<Prediction>)> {
    let (predictions, skipped) = predict_split(models, samples, vocab, options)?;
    let by_id: HashMap<&str, &AnnotatedSample> =
        samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();

    let mut total = 0.0;
    let mut scored = 0usize;
    let mut type_sum: BTreeMap<String, f64> = BTreeMap::new();
    let mut type_count: BTreeMap<String, usize> = BTreeMap::new();
    let mut ap_scores = Vec::new();
    let mut ap_labels = Vec::new();
    for p in &predictions {
        let sample = by_id[p.sample_id.as_str()];
        if !sample.answers.is_empty() {
            let crowd: Vec<String> = sample.answers.iter().map(|a| normalize_answer(a)).collect();
            let score = vqa_score(&p.answer, &crowd, options.score_mode)?;
            total += score;
            scored += 1;
            let target = select_target_answer(&crowd, vocab.global_freq(), options.score_mode)?;
            let kind = options.scheme.name(options.scheme.assign(&target)).to_string();
            *type_sum.entry(kind.clone()).or_default() += score;
            *type_count.entry(kind).or_default() += 1;
        }
        if sample.answerable_labeled {
            match options.positive_class {
                PositiveClass::Answerable => {
                    ap_scores.push(p.answerability);
                    ap_labels.push(sample.answerable);
                }
                PositiveClass::Unanswerable => {
                    ap_scores.push(1.0 - p.answerability);
                    ap_labels.push(!sample.answerable);
                }
            }
        }
    }

    let (answerability_ap, answerability_note) = if ap_labels.is_empty() {
        (None, Some("split has no answerability labels".to_string()))
    } else if !ap_labels.iter().any(|&l| l) {
        (None, Some("split has no positive answerability labels".to_string()))
    } else {
        (Some(average_precision(&ap_scores, &ap_labels)?), None)
    };
    let per_type_accuracy = type_sum
        .iter()
        .map(|(k, s)| (k.clone(), s / type_count[k] as f64))
        .collect();
    let report = EvalReport {
        vqa_accuracy: (scored > 0).then(|| total / scored as f64),
        answerability_ap,
        answerability_note,
        per_type_accuracy,
        per_type_count: type_count,
        sample_count: predictions.len(),
        scored_count: scored,
        skipped_count: skipped.len(),
        model_count: models.len(),
        score_mode: options.score_mode,
        positive_class: options.positive_class,
    };
    Ok((report, predictions))
}
