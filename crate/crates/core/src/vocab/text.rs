use crate::error::{Error, Result};

/// Canonical form used for every answer comparison and count: lowercase,
/// whitespace trimmed and collapsed, trailing `.`, `?`, `!` removed.
pub fn normalize_answer(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(['.', '?', '!'])
        .trim_end()
        .to_string()
}

/// Edit distance counted in Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + usize::from(ca != cb));
            diag = above;
        }
    }
    row[b.len()]
}

/// The candidate with the smallest summed distance to the others; ties go
/// to the lexicographically smallest string.
pub fn medoid<S: AsRef<str>>(candidates: &[S]) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::validation("medoid of an empty candidate list"));
    }
    let mut best: Option<(usize, &str)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let c = c.as_ref();
        let total: usize = candidates
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, o)| levenshtein(c, o.as_ref()))
            .sum();
        best = match best {
            Some((t, s)) if t < total || (t == total && s <= c) => Some((t, s)),
            _ => Some((total, c)),
        };
    }
    Ok(best.unwrap().1.to_string())
}
