use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::text::medoid;

/// How a candidate answer is credited against the crowd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// `min(matches / 3, 1)`.
    #[default]
    Simple,
    /// Mean of the simple score over every crowd subset with one answer left out.
    LeaveOneOut,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Simple => "simple",
            ScoreMode::LeaveOneOut => "leave_one_out",
        }
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(ScoreMode::Simple),
            "leave_one_out" => Ok(ScoreMode::LeaveOneOut),
            other => Err(Error::validation(format!("unknown score mode {other:?}"))),
        }
    }
}

/// VQA credit of `candidate` against the (normalized) crowd answers.
pub fn vqa_score<S: AsRef<str>>(candidate: &str, crowd: &[S], mode: ScoreMode) -> Result<f64> {
    if crowd.is_empty() {
        return Err(Error::validation("vqa score against an empty crowd"));
    }
    let matches = crowd.iter().filter(|c| c.as_ref() == candidate).count();
    let score = match mode {
        ScoreMode::Simple => matches.min(3) as f64 / 3.0,
        ScoreMode::LeaveOneOut => {
            let n = crowd.len();
            // dropping a matching answer leaves matches-1, any other leaves matches
            let numerator = matches * (matches.saturating_sub(1)).min(3)
                + (n - matches) * matches.min(3);
            numerator as f64 / (3 * n) as f64
        }
    };
    Ok(score)
}

/// Picks the training target for one sample: highest VQA score among the
/// unique crowd answers, then highest global frequency, then the Levenshtein
/// medoid of whatever is still tied.
pub fn select_target_answer<S: AsRef<str>>(
    crowd: &[S],
    global_freq: &HashMap<String, u64>,
    mode: ScoreMode,
) -> Result<String> {
    if crowd.is_empty() {
        return Err(Error::validation("target selection on an empty crowd"));
    }
    let unique: BTreeSet<&str> = crowd.iter().map(AsRef::as_ref).collect();
    let scored = unique
        .into_iter()
        .map(|a| Ok((a, vqa_score(a, crowd, mode)?)))
        .collect::<Result<Vec<_>>>()?;
    let top = scored.iter().map(|&(_, s)| s).fold(f64::MIN, f64::max);
    let by_score: Vec<&str> = scored
        .iter()
        .filter(|&&(_, s)| s == top)
        .map(|&(a, _)| a)
        .collect();
    if by_score.len() == 1 {
        return Ok(by_score[0].to_string());
    }
    let freq = |a: &str| global_freq.get(a).copied().unwrap_or(0);
    let max_freq = by_score.iter().map(|a| freq(a)).max().unwrap_or(0);
    let by_freq: Vec<&str> = by_score
        .into_iter()
        .filter(|a| freq(a) == max_freq)
        .collect();
    if by_freq.len() == 1 {
        return Ok(by_freq[0].to_string());
    }
    medoid(&by_freq)
}
