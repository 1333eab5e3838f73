use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

/// One image-question pair with its crowd answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    /// Image file name; also the key for both feature files.
    pub sample_id: String,
    pub question: String,
    /// Raw crowd answers in file order. Empty for unlabeled splits.
    pub answers: Vec<String>,
    pub answerable: bool,
    /// Whether `answerable` came from the file rather than the default.
    pub answerable_labeled: bool,
}

/// How strictly to validate the answer lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Every sample must carry exactly this many crowd answers.
    Train { answers_per_sample: usize },
    /// Answers are optional.
    Infer,
}

impl Default for ParseMode {
    fn default() -> Self {
        ParseMode::Train {
            answers_per_sample: 10,
        }
    }
}

#[derive(Deserialize)]
struct RawSample {
    image: String,
    question: String,
    #[serde(default)]
    answers: Option<Vec<RawAnswer>>,
    #[serde(default)]
    answerable: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct RawAnswer {
    answer: String,
}

pub fn parse_annotations(path: &Path, mode: ParseMode) -> Result<Vec<AnnotatedSample>> {
    let text = fsutil::read_text(path)?;
    parse_annotations_str(&text, mode)
}

pub fn parse_annotations_str(text: &str, mode: ParseMode) -> Result<Vec<AnnotatedSample>> {
    let raw: Vec<RawSample> = serde_json::from_str(text).map_err(|e| Error::json(e, text))?;
    let mut seen = HashSet::with_capacity(raw.len());
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        if r.image.is_empty() {
            return Err(Error::validation("annotation with empty image name"));
        }
        if !seen.insert(r.image.clone()) {
            return Err(Error::validation(format!(
                "duplicate sample id {:?} in split",
                r.image
            )));
        }
        let answers: Vec<String> = r
            .answers
            .unwrap_or_default()
            .into_iter()
            .map(|a| a.answer)
            .collect();
        if let ParseMode::Train { answers_per_sample } = mode {
            if answers.len() != answers_per_sample {
                return Err(Error::validation(format!(
                    "sample {:?} has {} answers, expected {answers_per_sample}",
                    r.image,
                    answers.len()
                )));
            }
        }
        let (answerable, answerable_labeled) = match r.answerable {
            None | Some(serde_json::Value::Null) => (true, false),
            Some(v) => (parse_flag(&v, &r.image)?, true),
        };
        out.push(AnnotatedSample {
            sample_id: r.image,
            question: r.question,
            answers,
            answerable,
            answerable_labeled,
        });
    }
    Ok(out)
}

fn parse_flag(v: &serde_json::Value, id: &str) -> Result<bool> {
    match v {
        serde_json::Value::Bool(b) => Ok(*b),
        serde_json::Value::Number(n) => match n.as_f64() {
            Some(0.0) => Ok(false),
            Some(1.0) => Ok(true),
            _ => Err(Error::validation(format!(
                "sample {id:?}: answerable must be 0 or 1, got {n}"
            ))),
        },
        other => Err(Error::validation(format!(
            "sample {id:?}: answerable must be 0 or 1, got {other}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten(answer: &str) -> String {
        let items: Vec<String> = (0..10)
            .map(|_| format!("{{\"answer\": \"{answer}\", \"answer_confidence\": \"yes\"}}"))
            .collect();
        items.join(",")
    }

    #[test]
    fn empty_array() {
        assert!(parse_annotations_str("[]", ParseMode::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn maps_fields_and_keeps_duplicates() {
        let text = format!(
            r#"[{{"image": "a.jpg", "question": "q?", "answers": [{}], "answerable": 1, "answer_type": "yes/no"}}]"#,
            ten("yes")
        );
        let s = parse_annotations_str(&text, ParseMode::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].sample_id, "a.jpg");
        assert_eq!(s[0].question, "q?");
        assert_eq!(s[0].answers, vec!["yes".to_string(); 10]);
        assert!(s[0].answerable && s[0].answerable_labeled);
    }

    #[test]
    fn missing_answers_defaults() {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/unlabeled.json"
        ))
        .unwrap();
        let s = parse_annotations_str(&text, ParseMode::Infer).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s[0].answers.is_empty());
        assert!(s[0].answerable);
        assert!(!s[0].answerable_labeled);
        assert!(!s[1].answerable);
        assert!(s[1].answerable_labeled);
    }

    #[test]
    fn wrong_answer_count_names_sample() {
        let text = r#"[{"image": "bad.jpg", "question": "q", "answers": [{"answer": "x"}]}]"#;
        let err = parse_annotations_str(text, ParseMode::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("bad.jpg"));
        assert!(parse_annotations_str(
            text,
            ParseMode::Train {
                answers_per_sample: 1
            }
        )
        .is_ok());
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = "[{\"image\": \"a.jpg\", \"question\": }]";
        match parse_annotations_str(text, ParseMode::Infer).unwrap_err() {
            Error::Json { offset, .. } => assert_eq!(offset, 32),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = r#"[{"image": "a", "question": "q"}, {"image": "a", "question": "r"}]"#;
        assert!(parse_annotations_str(text, ParseMode::Infer).is_err());
    }
}
