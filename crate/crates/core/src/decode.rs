//! Mapping a [`LogitMatrix`] to its most likely phrase.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use crate::ctc::{log_add, log_phrase_prob, reduce, Alignment, LogitMatrix, Phrase};

pub const DEFAULT_BEAM_WIDTH: usize = 32;

/// Best-path decoding: per-frame argmax (ties to the lowest index), then reduction.
pub fn greedy_decode(y: &LogitMatrix) -> Phrase {
    let path = (0..y.frames())
        .map(|t| {
            let row = y.row(t);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    reduce(&Alignment(path), y.blank())
}

#[derive(Clone, Copy)]
struct PrefixScore {
    /// ends in blank
    blank: f64,
    /// ends in the prefix's last label
    label: f64,
}

impl PrefixScore {
    const ZERO: PrefixScore = PrefixScore {
        blank: f64::NEG_INFINITY,
        label: f64::NEG_INFINITY,
    };

    fn total(&self) -> f64 {
        log_add(self.blank, self.label)
    }
}

/// Higher score first, then lexicographically smaller label sequence.
fn rank(a: (&[usize], f64), b: (&[usize], f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Final prefixes of a prefix beam search keeping `beam_width` hypotheses.
///
/// Alignments that reduce to the same prefix are merged by tracking separate
/// blank-ending and label-ending probabilities.
fn prefix_beam(log_probs: &[Vec<f64>], blank: usize, beam_width: usize) -> Vec<Vec<usize>> {
    let mut beam: Vec<(Vec<usize>, PrefixScore)> = vec![(
        Vec::new(),
        PrefixScore {
            blank: 0.0,
            label: f64::NEG_INFINITY,
        },
    )];
    let mut next: HashMap<Vec<usize>, PrefixScore> = HashMap::new();
    for log_row in log_probs {
        next.clear();
        for (prefix, score) in &beam {
            let total = score.total();
            let stay = next.entry(prefix.clone()).or_insert(PrefixScore::ZERO);
            stay.blank = log_add(stay.blank, total + log_row[blank]);
            let last = prefix.last().copied();
            if let Some(l) = last {
                // repeated label without an intervening blank collapses
                stay.label = log_add(stay.label, score.label + log_row[l]);
            }
            for (c, &lp) in log_row.iter().enumerate().take(blank) {
                let from = if last == Some(c) { score.blank } else { total };
                if lp == f64::NEG_INFINITY || from == f64::NEG_INFINITY {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(c);
                let e = next.entry(extended).or_insert(PrefixScore::ZERO);
                e.label = log_add(e.label, from + lp);
            }
        }
        let mut scored: Vec<(Vec<usize>, PrefixScore)> = next.drain().collect();
        scored.sort_by(|a, b| rank((&a.0, a.1.total()), (&b.0, b.1.total())));
        scored.truncate(beam_width);
        beam = scored;
    }
    beam.into_iter().map(|(p, _)| p).collect()
}

/// Beam-search approximation of the most likely phrase.
///
/// Candidates are the final prefixes of a prefix beam search at every width from 1
/// to `beam_width`, plus the greedy phrase. Each is rescored with the exact CTC
/// forward pass and the best is returned with its exact log-probability. Because
/// the candidate pools are nested, a wider beam never returns a lower score.
pub fn beam_search_decode(y: &LogitMatrix, beam_width: usize) -> (Phrase, f64) {
    let beam_width = beam_width.max(1);
    let blank = y.blank();
    let log_probs: Vec<Vec<f64>> = (0..y.frames())
        .map(|t| y.row(t).iter().map(|p| p.ln()).collect())
        .collect();
    let mut candidates: HashSet<Vec<usize>> = HashSet::new();
    candidates.insert(greedy_decode(y).0);
    for width in 1..=beam_width {
        candidates.extend(prefix_beam(&log_probs, blank, width));
    }
    candidates
        .into_iter()
        .map(|p| {
            let lp = log_phrase_prob(&Phrase(p.clone()), y).expect("labels come from the matrix");
            (p, lp)
        })
        .min_by(|a, b| rank((&a.0, a.1), (&b.0, b.1)))
        .map(|(p, lp)| (Phrase(p), lp))
        .expect("at least the greedy candidate")
}
