//! Answer vocabulary: target selection, class list, answer types.

mod score;
mod text;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::ingest::AnnotatedSample;

pub use score::{select_target_answer, vqa_score, ScoreMode};
pub use text::{levenshtein, medoid, normalize_answer};
pub use types::{
    assign_answer_type, AnswerType, TypeRuleConfig, TypeScheme, TypeSchemeConfig, DEFAULT_TYPES,
};

/// Sample id → class index, in annotation order.
pub type Targets = IndexMap<String, usize>;

/// What the global answer frequency counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyCount {
    /// Every crowd answer of every sample.
    #[default]
    AllAnswers,
    /// Each distinct answer once per sample.
    PerSample,
}

#[derive(Debug, Clone, Default)]
pub struct VocabOptions {
    pub score_mode: ScoreMode,
    pub frequency: FrequencyCount,
    pub scheme: TypeScheme,
}

/// Sorted answer classes with their types and the training-split answer
/// frequencies used for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    classes: Vec<String>,
    index_of: HashMap<String, usize>,
    class_type: Vec<AnswerType>,
    type_names: Vec<String>,
    global_freq: HashMap<String, u64>,
    score_mode: ScoreMode,
    rule_table_hash: String,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    classes: Vec<String>,
    types: Vec<String>,
    type_names: Vec<String>,
    global_freq: BTreeMap<String, u64>,
    score_mode: ScoreMode,
    rule_table_hash: String,
}

impl Vocabulary {
    pub fn from_parts(
        classes: Vec<String>,
        class_type: Vec<AnswerType>,
        type_names: Vec<String>,
        global_freq: HashMap<String, u64>,
        score_mode: ScoreMode,
        rule_table_hash: String,
    ) -> Result<Self> {
        if classes.len() != class_type.len() {
            return Err(Error::validation(format!(
                "{} classes but {} class types",
                classes.len(),
                class_type.len()
            )));
        }
        if type_names.is_empty() {
            return Err(Error::validation("vocabulary without answer types"));
        }
        for pair in classes.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::validation(format!(
                    "classes not strictly sorted at {:?} / {:?}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(c) = classes.iter().find(|c| normalize_answer(c) != **c) {
            return Err(Error::validation(format!("class {c:?} is not normalized")));
        }
        if let Some(t) = class_type.iter().find(|t| t.0 >= type_names.len()) {
            return Err(Error::validation(format!("class type index {} out of range", t.0)));
        }
        let index_of = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(Self {
            classes,
            index_of,
            class_type,
            type_names,
            global_freq,
            score_mode,
            rule_table_hash,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, answer: &str) -> Option<usize> {
        self.index_of.get(answer).copied()
    }

    pub fn class_type(&self, class: usize) -> AnswerType {
        self.class_type[class]
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn global_freq(&self) -> &HashMap<String, u64> {
        &self.global_freq
    }

    pub fn score_mode(&self) -> ScoreMode {
        self.score_mode
    }

    pub fn rule_table_hash(&self) -> &str {
        &self.rule_table_hash
    }

    /// Identity of the class layout (classes, their types, the type list).
    /// Checkpoints record it so they are never paired with another vocabulary.
    pub fn hash(&self) -> String {
        let types: Vec<&str> = self.class_type.iter().map(|t| self.type_names[t.0].as_str()).collect();
        let json = serde_json::to_vec(&(&self.classes, &types, &self.type_names))
            .expect("vocabulary serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn to_json(&self) -> String {
        let file = VocabularyFile {
            classes: self.classes.clone(),
            types: self
                .class_type
                .iter()
                .map(|t| self.type_names[t.0].clone())
                .collect(),
            type_names: self.type_names.clone(),
            global_freq: self.global_freq.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            score_mode: self.score_mode,
            rule_table_hash: self.rule_table_hash.clone(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_str(text).map_err(|e| Error::json(e, text))?;
        let class_type = file
            .types
            .iter()
            .map(|name| {
                file.type_names
                    .iter()
                    .position(|t| t == name)
                    .map(AnswerType)
                    .ok_or_else(|| Error::validation(format!("unknown class type {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(
            file.classes,
            class_type,
            file.type_names,
            file.global_freq.into_iter().collect(),
            file.score_mode,
            file.rule_table_hash,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fsutil::read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fsutil::write_atomic(path, text.as_bytes())
    }
}

fn normalized_crowd(sample: &AnnotatedSample) -> Result<Vec<String>> {
    if sample.answers.is_empty() {
        return Err(Error::validation(format!(
            "sample {:?} has no crowd answers",
            sample.sample_id
        )));
    }
    Ok(sample.answers.iter().map(|a| normalize_answer(a)).collect())
}

fn count_answers(crowds: &[Vec<String>], mode: FrequencyCount) -> HashMap<String, u64> {
    let mut freq: HashMap<String, u64> = HashMap::new();
    for crowd in crowds {
        match mode {
            FrequencyCount::AllAnswers => {
                for a in crowd {
                    *freq.entry(a.clone()).or_default() += 1;
                }
            }
            FrequencyCount::PerSample => {
                for a in crowd.iter().collect::<BTreeSet<_>>() {
                    *freq.entry(a.clone()).or_default() += 1;
                }
            }
        }
    }
    freq
}

/// Selects one target per sample and collects the targets into the sorted
/// class list.
pub fn build_vocabulary(
    samples: &[AnnotatedSample],
    options: &VocabOptions,
) -> Result<(Vocabulary, Targets)> {
    let crowds = samples
        .iter()
        .map(normalized_crowd)
        .collect::<Result<Vec<_>>>()?;
    let global_freq = count_answers(&crowds, options.frequency);
    let selected = crowds
        .par_iter()
        .map(|c| select_target_answer(c, &global_freq, options.score_mode))
        .collect::<Result<Vec<_>>>()?;

    let classes: Vec<String> = selected
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_type = classes.iter().map(|c| options.scheme.assign(c)).collect();
    let vocab = Vocabulary::from_parts(
        classes,
        class_type,
        options.scheme.type_names().to_vec(),
        global_freq,
        options.score_mode,
        options.scheme.rule_table_hash(),
    )?;
    let targets = samples
        .iter()
        .zip(&selected)
        .map(|(s, a)| (s.sample_id.clone(), vocab.index_of(a).expect("target is a class")))
        .collect();
    Ok((vocab, targets))
}

/// Re-derives training targets for `samples` against an existing vocabulary,
/// using its stored frequencies and score mode.
pub fn targets_for(samples: &[AnnotatedSample], vocab: &Vocabulary) -> Result<Targets> {
    samples
        .iter()
        .map(|s| {
            let crowd = normalized_crowd(s)?;
            let answer = select_target_answer(&crowd, vocab.global_freq(), vocab.score_mode())?;
            let class = vocab.index_of(&answer).ok_or_else(|| {
                Error::VocabularyMismatch(format!(
                    "target {answer:?} of sample {:?} is not a vocabulary class",
                    s.sample_id
                ))
            })?;
            Ok((s.sample_id.clone(), class))
        })
        .collect()
}
