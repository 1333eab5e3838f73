//! Benchmark fixtures for `clipvqa-core`.

use clipvqa::ingest::AnnotatedSample;

/// Deterministic pseudo-random crowd answers drawn from a small alphabet of
/// short strings, so selection hits frequency and medoid ties regularly.
pub fn synthetic_samples(n: usize, seed: u64) -> Vec<AnnotatedSample> {
    let words = ["yes", "no", "red", "blue", "two", "2", "coke", "cake", "coffee", "unanswerable"];
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    (0..n)
        .map(|i| AnnotatedSample {
            sample_id: format!("img_{i:06}.jpg"),
            question: "what is this?".into(),
            answers: (0..10)
                .map(|_| words[(next() % words.len() as u64) as usize].to_string())
                .collect(),
            answerable: true,
            answerable_labeled: true,
        })
        .collect()
}
