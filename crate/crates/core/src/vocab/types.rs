//! Answer-type assignment by ordered rules.

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Index into a [`TypeScheme`]'s type list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnswerType(pub usize);

pub const DEFAULT_TYPES: [&str; 7] = [
    "other",
    "number",
    "yes",
    "no",
    "color",
    "unsuitable",
    "unanswerable",
];

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

const DEFAULT_COLORS: [&str; 16] = [
    "black", "white", "red", "green", "blue", "yellow", "orange", "purple", "pink", "brown",
    "gray", "grey", "gold", "silver", "beige", "tan",
];

/// One matching rule. Rules are tried in order and the first hit wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeRuleConfig {
    Exact { value: String, answer_type: String },
    Pattern { regex: String, answer_type: String },
    OneOf { values: Vec<String>, answer_type: String },
}

/// Serializable form of a [`TypeScheme`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSchemeConfig {
    pub types: Vec<String>,
    pub fallback: String,
    pub rules: Vec<TypeRuleConfig>,
}

impl Default for TypeSchemeConfig {
    fn default() -> Self {
        let s = |x: &str| x.to_string();
        let words = |w: &[&str]| w.iter().map(|x| x.to_string()).collect();
        Self {
            types: DEFAULT_TYPES.iter().map(|t| t.to_string()).collect(),
            fallback: s("other"),
            rules: vec![
                TypeRuleConfig::Exact {
                    value: s("unanswerable"),
                    answer_type: s("unanswerable"),
                },
                TypeRuleConfig::Pattern {
                    regex: s("^unsuitable( image)?$"),
                    answer_type: s("unsuitable"),
                },
                TypeRuleConfig::Exact {
                    value: s("yes"),
                    answer_type: s("yes"),
                },
                TypeRuleConfig::Exact {
                    value: s("no"),
                    answer_type: s("no"),
                },
                TypeRuleConfig::Pattern {
                    regex: s("^[0-9]+([.,][0-9]+)?$"),
                    answer_type: s("number"),
                },
                TypeRuleConfig::OneOf {
                    values: words(&NUMBER_WORDS),
                    answer_type: s("number"),
                },
                TypeRuleConfig::OneOf {
                    values: words(&DEFAULT_COLORS),
                    answer_type: s("color"),
                },
            ],
        }
    }
}

#[derive(Debug, Clone)]
enum Matcher {
    Exact(String),
    Pattern(Regex),
    OneOf(Vec<String>),
}

impl Matcher {
    fn is_match(&self, answer: &str) -> bool {
        match self {
            Matcher::Exact(v) => v == answer,
            Matcher::Pattern(re) => re.is_match(answer),
            Matcher::OneOf(vs) => vs.iter().any(|v| v == answer),
        }
    }
}

/// Compiled type rules plus the ordered type list.
#[derive(Debug, Clone)]
pub struct TypeScheme {
    config: TypeSchemeConfig,
    rules: Vec<(Matcher, AnswerType)>,
    fallback: AnswerType,
}

impl Default for TypeScheme {
    fn default() -> Self {
        Self::from_config(TypeSchemeConfig::default()).expect("default type rules compile")
    }
}

impl TypeScheme {
    /// Reads a JSON rule table (the serialized [`TypeSchemeConfig`]).
    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = crate::fsutil::read_text(path)?;
        let config: TypeSchemeConfig = serde_json::from_str(&text).map_err(|e| Error::json(e, &text))?;
        Self::from_config(config)
    }

    pub fn from_config(config: TypeSchemeConfig) -> Result<Self> {
        let lookup = |name: &str| {
            config
                .types
                .iter()
                .position(|t| t == name)
                .map(AnswerType)
                .ok_or_else(|| Error::validation(format!("type rule names unknown type {name:?}")))
        };
        for (i, t) in config.types.iter().enumerate() {
            if config.types[..i].contains(t) {
                return Err(Error::validation(format!("answer type {t:?} listed twice")));
            }
        }
        let fallback = lookup(&config.fallback)?;
        let mut rules = Vec::with_capacity(config.rules.len());
        for rule in &config.rules {
            let compiled = match rule {
                TypeRuleConfig::Exact { value, answer_type } => {
                    (Matcher::Exact(value.clone()), lookup(answer_type)?)
                }
                TypeRuleConfig::Pattern { regex, answer_type } => {
                    let re = Regex::new(regex).map_err(|e| {
                        Error::validation(format!("bad type pattern {regex:?}: {e}"))
                    })?;
                    (Matcher::Pattern(re), lookup(answer_type)?)
                }
                TypeRuleConfig::OneOf {
                    values,
                    answer_type,
                } => (Matcher::OneOf(values.clone()), lookup(answer_type)?),
            };
            rules.push(compiled);
        }
        Ok(Self {
            config,
            rules,
            fallback,
        })
    }

    pub fn config(&self) -> &TypeSchemeConfig {
        &self.config
    }

    pub fn type_names(&self) -> &[String] {
        &self.config.types
    }

    pub fn name(&self, t: AnswerType) -> &str {
        &self.config.types[t.0]
    }

    pub fn len(&self) -> usize {
        self.config.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.types.is_empty()
    }

    /// Type of a normalized answer.
    pub fn assign(&self, answer: &str) -> AnswerType {
        self.rules
            .iter()
            .find(|(m, _)| m.is_match(answer))
            .map(|&(_, t)| t)
            .unwrap_or(self.fallback)
    }

    /// SHA-256 over the canonical JSON of the rule table.
    pub fn rule_table_hash(&self) -> String {
        let json = serde_json::to_vec(&self.config).expect("rule table serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Type of `answer` under the default rule table.
pub fn assign_answer_type(answer: &str) -> AnswerType {
    static DEFAULT: std::sync::OnceLock<TypeScheme> = std::sync::OnceLock::new();
    DEFAULT.get_or_init(TypeScheme::default).assign(answer)
}
