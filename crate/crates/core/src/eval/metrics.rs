use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ingest::AnnotatedSample;
use crate::vocab::{normalize_answer, vqa_score, ScoreMode};

use super::Prediction;

/// Mean VQA score of the predicted answers against each sample's crowd.
pub fn vqa_accuracy(
    predictions: &[Prediction],
    samples: &[AnnotatedSample],
    mode: ScoreMode,
) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::validation("no predictions to score"));
    }
    let by_id: HashMap<&str, &AnnotatedSample> =
        samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let mut total = 0.0;
    for p in predictions {
        let sample = by_id.get(p.sample_id.as_str()).ok_or_else(|| {
            Error::validation(format!("prediction for unknown sample {:?}", p.sample_id))
        })?;
        let crowd: Vec<String> = sample.answers.iter().map(|a| normalize_answer(a)).collect();
        total += vqa_score(&normalize_answer(&p.answer), &crowd, mode)?;
    }
    Ok(total / predictions.len() as f64)
}

/// Non-interpolated average precision: mean of precision@k over the ranks k
/// holding a positive. Ranking is by descending score; equal scores keep
/// their input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("average precision scores".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::validation("average precision needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("no NaN"));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}
