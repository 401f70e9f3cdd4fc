//! String-level transcription metrics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("both strings are empty")]
    BothEmpty,
    #[error("reference has no words")]
    EmptyReference,
}

fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance over characters with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

/// Edit distance divided by the longer string's length.
pub fn normalized_edit_distance(a: &str, b: &str) -> Result<f64, MetricError> {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return Err(MetricError::BothEmpty);
    }
    Ok(edit_distance(a, b) as f64 / longest as f64)
}

/// Longest common contiguous block of `a[alo..ahi]` and `b[blo..bhi]`, as
/// `(start_a, start_b, len)`. Ties go to the earliest start in `a`, then in `b`.
fn longest_block(
    a: &[char],
    b: &[char],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let mut best = (alo, blo, 0);
    // run[j] = length of the common suffix ending at a[i-1], b[j-1]
    let mut run = vec![0usize; bhi - blo + 1];
    for i in alo..ahi {
        let mut diag = 0;
        for j in blo..bhi {
            let up = run[j - blo + 1];
            run[j - blo + 1] = if a[i] == b[j] { diag + 1 } else { 0 };
            diag = up;
            let len = run[j - blo + 1];
            if len > best.2 {
                best = (i + 1 - len, j + 1 - len, len);
            }
        }
    }
    best
}

fn matched(a: &[char], b: &[char], alo: usize, ahi: usize, blo: usize, bhi: usize) -> usize {
    let (i, j, len) = longest_block(a, b, alo, ahi, blo, bhi);
    if len == 0 {
        return 0;
    }
    len + matched(a, b, alo, i, blo, j) + matched(a, b, i + len, ahi, j + len, bhi)
}

/// Number of characters matched by recursive longest-block matching.
///
/// Leftmost tie-breaking makes a single pass order-dependent ("ba" against "abca"
/// matches 2 one way and 1 the other), so the larger of both orientations is used.
pub fn matching_characters(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    matched(&a, &b, 0, a.len(), 0, b.len()).max(matched(&b, &a, 0, b.len(), 0, a.len()))
}

/// `2M / T`: `M` matched characters, `T` the combined length. Two empty strings give 1.0.
pub fn similarity(a: &str, b: &str) -> f64 {
    let total = a.chars().count() + b.chars().count();
    if total == 0 {
        return 1.0;
    }
    2.0 * matching_characters(a, b) as f64 / total as f64
}

/// Word-level Levenshtein distance over the reference word count.
pub fn word_error_rate(reference: &str, hypothesis: &str) -> Result<f64, MetricError> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}
