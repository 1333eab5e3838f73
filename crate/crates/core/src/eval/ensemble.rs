use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::{softmax, HeadOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Weighted mean of the softmax probabilities.
    #[default]
    ProbabilityMean,
    /// Weighted mean of the logits, then softmax.
    LogitMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub answer_probs: Vec<f64>,
    pub type_probs: Vec<f64>,
    pub answerability: f64,
    /// Arg-max of `answer_probs`, lowest index on ties.
    pub answer_index: usize,
}

fn weighted_mean<'a>(rows: impl Iterator<Item = &'a [f64]>, weights: &[f64], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for (row, &w) in rows.zip(weights) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += w * v;
        }
    }
    acc
}

/// Combines per-model outputs for one sample. `weights` default to uniform
/// and must be non-negative and sum to one.
pub fn ensemble_predict(
    outputs: &[HeadOutput],
    weights: Option<&[f64]>,
    mode: EnsembleMode,
) -> Result<EnsembleOutput> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::validation("ensemble of zero models"))?;
    let (a, t) = (first.answer_probs.len(), first.type_probs.len());
    if outputs
        .iter()
        .any(|o| o.answer_probs.len() != a || o.type_probs.len() != t || o.answer_logits.len() != a || o.type_logits.len() != t)
    {
        return Err(Error::Dimension("ensemble members disagree on output sizes".into()));
    }
    let uniform;
    let weights = match weights {
        Some(w) => {
            if w.len() != outputs.len() {
                return Err(Error::Dimension(format!(
                    "{} weights for {} models",
                    w.len(),
                    outputs.len()
                )));
            }
            if w.iter().any(|x| x.is_nan() || *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::validation("ensemble weights must be non-negative and sum to 1"));
            }
            w
        }
        None => {
            uniform = vec![1.0 / outputs.len() as f64; outputs.len()];
            &uniform
        }
    };

    let (answer_probs, type_probs) = match mode {
        EnsembleMode::ProbabilityMean => (
            weighted_mean(outputs.iter().map(|o| o.answer_probs.as_slice()), weights, a),
            weighted_mean(outputs.iter().map(|o| o.type_probs.as_slice()), weights, t),
        ),
        EnsembleMode::LogitMean => (
            softmax(&weighted_mean(outputs.iter().map(|o| o.answer_logits.as_slice()), weights, a)),
            softmax(&weighted_mean(outputs.iter().map(|o| o.type_logits.as_slice()), weights, t)),
        ),
    };
    let answerability = outputs
        .iter()
        .zip(weights)
        .fold(0.0, |acc, (o, w)| acc + w * o.answerability);
    let answer_index = crate::head::argmax(&answer_probs);
    Ok(EnsembleOutput {
        answer_probs,
        type_probs,
        answerability,
        answer_index,
    })
}
