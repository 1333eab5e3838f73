use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::forward::{forward_with_masks, softmax};
use super::params::GatedHeadParams;

/// How the answerability score is derived from a head's outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerabilityPolicyKind {
    /// `1 - P(type ∈ {unanswerable, unsuitable})`.
    #[default]
    Type,
    /// `1 - P(answer = "unanswerable")`.
    AnswerClass,
}

impl std::str::FromStr for AnswerabilityPolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type" => Ok(Self::Type),
            "answer-class" => Ok(Self::AnswerClass),
            other => Err(Error::validation(format!(
                "unknown answerability policy {other:?}"
            ))),
        }
    }
}

/// An [`AnswerabilityPolicyKind`] resolved against concrete type and class
/// indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerabilityPolicy {
    TypeMass(Vec<usize>),
    AnswerClass(Option<usize>),
}

impl AnswerabilityPolicy {
    pub fn resolve<S: AsRef<str>, C: AsRef<str>>(
        kind: AnswerabilityPolicyKind,
        type_names: &[S],
        classes: &[C],
    ) -> Self {
        match kind {
            AnswerabilityPolicyKind::Type => Self::TypeMass(
                type_names
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| matches!(t.as_ref(), "unanswerable" | "unsuitable"))
                    .map(|(i, _)| i)
                    .collect(),
            ),
            AnswerabilityPolicyKind::AnswerClass => {
                Self::AnswerClass(classes.iter().position(|c| c.as_ref() == "unanswerable"))
            }
        }
    }

    pub fn score(&self, answer_probs: &[f64], type_probs: &[f64]) -> f64 {
        let unanswerable = match self {
            Self::TypeMass(idx) => idx.iter().map(|&i| type_probs[i]).sum(),
            Self::AnswerClass(Some(i)) => answer_probs[*i],
            Self::AnswerClass(None) => 0.0,
        };
        (1.0 - unanswerable).clamp(0.0, 1.0)
    }
}

/// Eval-mode outputs of one head for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub answer_probs: Vec<f64>,
    pub type_probs: Vec<f64>,
    pub answerability: f64,
    /// Gated answer logits.
    pub answer_logits: Vec<f64>,
    pub type_logits: Vec<f64>,
}

impl HeadOutput {
    /// Arg-max class, lowest index on ties.
    pub fn best_class(&self) -> usize {
        argmax(&self.answer_probs)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

pub fn predict(
    params: &GatedHeadParams,
    image: &[f64],
    text: &[f64],
    policy: &AnswerabilityPolicy,
) -> Result<HeadOutput> {
    let trace = forward_with_masks(params, image, text, None)?;
    let answer_probs = softmax(trace.gated_logits());
    let type_probs = softmax(trace.type_logits());
    let answerability = policy.score(&answer_probs, &type_probs);
    Ok(HeadOutput {
        answer_probs,
        type_probs,
        answerability,
        answer_logits: trace.gated_logits().to_vec(),
        type_logits: trace.type_logits().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::{init_params, HeadArch};
    use crate::vocab::DEFAULT_TYPES;

    #[test]
    fn zero_params_uniform() {
        let arch = HeadArch::new(2, 2, 3, 5, 7);
        let p = GatedHeadParams::zeros(&arch).unwrap();
        let policy = AnswerabilityPolicy::resolve(AnswerabilityPolicyKind::Type, &DEFAULT_TYPES, &[] as &[&str]);
        let out = predict(&p, &[1.0, 2.0], &[0.0, 1.0], &policy).unwrap();
        assert!(out.answer_probs.iter().all(|&q| (q - 0.2).abs() < 1e-15));
        assert!(out.type_probs.iter().all(|&q| (q - 1.0 / 7.0).abs() < 1e-15));
        assert!((out.answerability - (1.0 - 2.0 / 7.0)).abs() < 1e-12);
        assert_eq!(out.best_class(), 0);
    }

    #[test]
    fn probabilities_normalized() {
        for seed in 0..20 {
            let p = init_params(&HeadArch::new(3, 3, 4, 6, 7), seed).unwrap();
            let policy = AnswerabilityPolicy::TypeMass(vec![5, 6]);
            let out = predict(&p, &[1.0, -2.0, 0.5], &[0.3, 0.2, 0.1], &policy).unwrap();
            assert!((out.answer_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((out.type_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(out.answer_probs.iter().chain(&out.type_probs).all(|&q| q >= 0.0));
            assert!((0.0..=1.0).contains(&out.answerability));
        }
    }

    #[test]
    fn strong_unanswerable_type() {
        let arch = HeadArch::new(2, 2, 3, 4, 7);
        let mut p = GatedHeadParams::zeros(&arch).unwrap();
        p.answer_type.bias[6] = 10.0;
        let policy = AnswerabilityPolicy::resolve(AnswerabilityPolicyKind::Type, &DEFAULT_TYPES, &[] as &[&str]);
        let out = predict(&p, &[1.0, 2.0], &[0.0, 1.0], &policy).unwrap();
        assert!(out.answerability < 0.05, "{}", out.answerability);
    }

    #[test]
    fn answer_class_policy() {
        let classes = ["no", "unanswerable", "yes"];
        let policy = AnswerabilityPolicy::resolve(AnswerabilityPolicyKind::AnswerClass, &DEFAULT_TYPES, &classes);
        assert_eq!(policy, AnswerabilityPolicy::AnswerClass(Some(1)));
        assert!((policy.score(&[0.2, 0.7, 0.1], &[]) - 0.3).abs() < 1e-12);
        let none = AnswerabilityPolicy::resolve(AnswerabilityPolicyKind::AnswerClass, &DEFAULT_TYPES, &["a"]);
        assert_eq!(none.score(&[1.0], &[]), 1.0);
    }
}
