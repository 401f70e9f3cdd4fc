//! Connectionist Temporal Classification: alignment reduction, exact phrase
//! probabilities, the CTC loss and its gradient.
//!
//! Every [`LogitMatrix`] reserves its **last** column for the blank token, so an
//! alphabet with `L` labels pairs with matrices of `L + 1` columns.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CtcError {
    #[error("target phrase has probability zero under the given distribution")]
    ImpossibleTarget,
    #[error("length mismatch: alignment has {0} frames, matrix has {1}")]
    LengthMismatch(usize, usize),
    #[error("enumeration too large: {frames} frames over {classes} classes")]
    TooLarge { frames: usize, classes: usize },
    #[error("label {0} out of range")]
    InvalidLabel(usize),
    #[error("character {0:?} is not in the alphabet")]
    UnknownChar(char),
    #[error("invalid probability matrix: {0}")]
    InvalidMatrix(String),
}

pub type Result<T> = std::result::Result<T, CtcError>;

/// Ordered output tokens; the blank sits after the last label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<char>,
}

impl Alphabet {
    pub fn new(labels: &[char]) -> std::result::Result<Self, String> {
        let mut seen = std::collections::HashSet::new();
        for &c in labels {
            if !seen.insert(c) {
                return Err(format!("duplicate token {c:?}"));
            }
        }
        Ok(Self {
            labels: labels.to_vec(),
        })
    }

    /// `a`-`z`, space and apostrophe.
    pub fn english() -> Self {
        let mut labels: Vec<char> = ('a'..='z').collect();
        labels.push(' ');
        labels.push('\'');
        Self { labels }
    }

    pub fn labels(&self) -> &[char] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// Label count plus the blank.
    pub fn num_classes(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn blank(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.labels.iter().position(|&l| l == c)
    }

    pub fn encode(&self, text: &str) -> Result<Phrase> {
        text.chars()
            .map(|c| self.index_of(c).ok_or(CtcError::UnknownChar(c)))
            .collect::<Result<Vec<_>>>()
            .map(Phrase)
    }

    pub fn decode(&self, phrase: &Phrase) -> String {
        phrase.0.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn as_string(&self) -> String {
        self.labels.iter().collect()
    }
}

/// A blank-free label sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phrase(pub Vec<usize>);

impl Phrase {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    /// Shortest alignment length: one frame per label plus a blank between repeats.
    pub fn min_frames(&self) -> usize {
        self.0.len() + self.0.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// A per-frame token sequence over labels and blank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alignment(pub Vec<usize>);

/// Per-frame probability distributions, `frames x classes`, blank in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    probs: Vec<f64>,
    frames: usize,
    classes: usize,
}

impl LogitMatrix {
    pub fn new(probs: Vec<f64>, frames: usize, classes: usize) -> Result<Self> {
        if classes < 2 || probs.len() != frames * classes {
            return Err(CtcError::InvalidMatrix(format!(
                "{} values for {frames} x {classes}",
                probs.len()
            )));
        }
        for (t, row) in probs.chunks(classes).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(CtcError::InvalidMatrix(format!(
                    "row {t} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CtcError::InvalidMatrix(format!("row {t} sums to {sum}")));
            }
        }
        Ok(Self::new_unchecked(probs, frames, classes))
    }

    pub(crate) fn new_unchecked(probs: Vec<f64>, frames: usize, classes: usize) -> Self {
        Self {
            probs,
            frames,
            classes,
        }
    }

    /// Row-wise softmax of unnormalized scores.
    pub fn from_scores(scores: &[f64], frames: usize, classes: usize) -> Result<Self> {
        if scores.len() != frames * classes || classes < 2 {
            return Err(CtcError::InvalidMatrix("score shape".into()));
        }
        let mut probs = scores.to_vec();
        for row in probs.chunks_mut(classes) {
            softmax_in_place(row);
        }
        Ok(Self::new_unchecked(probs, frames, classes))
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn blank(&self) -> usize {
        self.classes - 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.classes..(t + 1) * self.classes]
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.probs[t * self.classes + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    fn check_phrase(&self, p: &Phrase) -> Result<()> {
        match p.0.iter().find(|&&l| l >= self.blank()) {
            Some(&l) => Err(CtcError::InvalidLabel(l)),
            None => Ok(()),
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `ln(e^a + e^b)` with `-inf` as probability zero.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Collapses runs of repeated tokens, then deletes blanks.
pub fn reduce(a: &Alignment, blank: usize) -> Phrase {
    let mut out = Vec::new();
    let mut prev = None;
    for &tok in &a.0 {
        if prev != Some(tok) && tok != blank {
            out.push(tok);
        }
        prev = Some(tok);
    }
    Phrase(out)
}

/// Every length-`frames` alignment over `classes` tokens (blank last) that reduces to `p`.
/// Exhaustive; limited to `frames <= 8` and `classes <= 4`.
pub fn enumerate_alignments(p: &Phrase, frames: usize, classes: usize) -> Result<Vec<Alignment>> {
    if frames > 8 || classes > 4 || classes < 2 {
        return Err(CtcError::TooLarge { frames, classes });
    }
    let blank = classes - 1;
    if let Some(&l) = p.0.iter().find(|&&l| l >= blank) {
        return Err(CtcError::InvalidLabel(l));
    }
    let total = classes.pow(frames as u32);
    let mut out = Vec::new();
    let mut seq = vec![0; frames];
    for code in 0..total {
        let mut c = code;
        // most significant digit first, so the output is in lexicographic order
        for slot in seq.iter_mut().rev() {
            *slot = c % classes;
            c /= classes;
        }
        let a = Alignment(seq.clone());
        if reduce(&a, blank) == *p {
            out.push(a);
        }
    }
    Ok(out)
}

/// Product of the per-frame likelihoods of the alignment's tokens.
pub fn alignment_prob(a: &Alignment, y: &LogitMatrix) -> Result<f64> {
    if a.0.len() != y.frames {
        return Err(CtcError::LengthMismatch(a.0.len(), y.frames));
    }
    a.0.iter()
        .enumerate()
        .map(|(t, &c)| {
            if c >= y.classes {
                Err(CtcError::InvalidLabel(c))
            } else {
                Ok(y.get(t, c))
            }
        })
        .product()
}

/// Blank-interleaved label sequence `b p1 b p2 ... pn b`.
fn extended(p: &Phrase, blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * p.len() + 1);
    ext.push(blank);
    for &l in &p.0 {
        ext.push(l);
        ext.push(blank);
    }
    ext
}

fn can_skip(ext: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]
}

/// Log-domain forward variables, `frames x states`.
struct Lattice {
    ext: Vec<usize>,
    log_y: Vec<f64>,
    alpha: Vec<f64>,
    states: usize,
    classes: usize,
}

impl Lattice {
    fn forward(p: &Phrase, y: &LogitMatrix) -> Self {
        let blank = y.blank();
        let ext = extended(p, blank);
        let states = ext.len();
        let log_y: Vec<f64> = y.probs.iter().map(|&v| v.ln()).collect();
        let classes = y.classes;
        let mut alpha = vec![f64::NEG_INFINITY; y.frames * states];
        if y.frames > 0 {
            alpha[0] = log_y[ext[0]];
            if states > 1 {
                alpha[1] = log_y[ext[1]];
            }
        }
        for t in 1..y.frames {
            let (prev, cur) = alpha.split_at_mut(t * states);
            let prev = &prev[(t - 1) * states..];
            for s in 0..states {
                let mut acc = prev[s];
                if s >= 1 {
                    acc = log_add(acc, prev[s - 1]);
                }
                if can_skip(&ext, s, blank) {
                    acc = log_add(acc, prev[s - 2]);
                }
                cur[s] = acc + log_y[t * classes + ext[s]];
            }
        }
        Self {
            ext,
            log_y,
            alpha,
            states,
            classes,
        }
    }

    fn log_prob(&self, frames: usize) -> f64 {
        if frames == 0 {
            return if self.states == 1 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        let last = &self.alpha[(frames - 1) * self.states..];
        let mut lp = last[self.states - 1];
        if self.states > 1 {
            lp = log_add(lp, last[self.states - 2]);
        }
        lp
    }
}

/// `ln Pr(p | y)`, `-inf` when no alignment of `p` fits in `y`'s frames.
pub fn log_phrase_prob(p: &Phrase, y: &LogitMatrix) -> Result<f64> {
    y.check_phrase(p)?;
    if p.min_frames() > y.frames {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(Lattice::forward(p, y).log_prob(y.frames))
}

/// `Pr(p | y)`: the sum of [`alignment_prob`] over every alignment of `p`.
pub fn phrase_prob(p: &Phrase, y: &LogitMatrix) -> Result<f64> {
    log_phrase_prob(p, y).map(f64::exp)
}

/// Negative log-likelihood of the target phrase.
pub fn ctc_loss(y: &LogitMatrix, p: &Phrase) -> Result<f64> {
    let lp = log_phrase_prob(p, y)?;
    if lp == f64::NEG_INFINITY {
        return Err(CtcError::ImpossibleTarget);
    }
    Ok((-lp).max(0.0))
}

/// Loss and its gradient with respect to every entry of `y`:
/// `dL/dy[t][c] = -occupancy(t, c) / y[t][c]`.
pub fn ctc_loss_and_grad(y: &LogitMatrix, p: &Phrase) -> Result<(f64, Vec<f64>)> {
    y.check_phrase(p)?;
    if p.min_frames() > y.frames {
        return Err(CtcError::ImpossibleTarget);
    }
    if y.frames == 0 {
        return Ok((0.0, Vec::new()));
    }
    let lattice = Lattice::forward(p, y);
    let log_p = lattice.log_prob(y.frames);
    if log_p == f64::NEG_INFINITY {
        return Err(CtcError::ImpossibleTarget);
    }
    let Lattice {
        ext,
        log_y,
        alpha,
        states,
        classes,
    } = lattice;
    let blank = y.blank();
    let frames = y.frames;

    // beta[t][s] includes the emission at t
    let mut beta = vec![f64::NEG_INFINITY; frames * states];
    let last = (frames - 1) * states;
    beta[last + states - 1] = log_y[(frames - 1) * classes + ext[states - 1]];
    if states > 1 {
        beta[last + states - 2] = log_y[(frames - 1) * classes + ext[states - 2]];
    }
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * states);
        let cur = &mut cur[t * states..];
        for s in 0..states {
            let mut acc = next[s];
            if s + 1 < states {
                acc = log_add(acc, next[s + 1]);
            }
            if s + 2 < states && can_skip(&ext, s + 2, blank) {
                acc = log_add(acc, next[s + 2]);
            }
            cur[s] = acc + log_y[t * classes + ext[s]];
        }
    }

    let mut grad = vec![0.0; frames * classes];
    let mut occ = vec![f64::NEG_INFINITY; classes];
    for t in 0..frames {
        occ.fill(f64::NEG_INFINITY);
        for s in 0..states {
            let i = t * states + s;
            occ[ext[s]] = log_add(occ[ext[s]], alpha[i] + beta[i]);
        }
        for c in 0..classes {
            let ly = log_y[t * classes + c];
            if occ[c] != f64::NEG_INFINITY && ly != f64::NEG_INFINITY {
                // occupancy = exp(occ - ly - log_p); gradient = -occupancy / y
                grad[t * classes + c] = -(occ[c] - 2.0 * ly - log_p).exp();
            }
        }
    }
    Ok(((-log_p).max(0.0), grad))
}

pub fn ctc_grad(y: &LogitMatrix, p: &Phrase) -> Result<Vec<f64>> {
    ctc_loss_and_grad(y, p).map(|(_, g)| g)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    pub fn random_matrix<R: Rng>(rng: &mut R, frames: usize, classes: usize) -> LogitMatrix {
        let scores: Vec<f64> = (0..frames * classes)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        LogitMatrix::from_scores(&scores, frames, classes).unwrap()
    }

    pub fn random_phrase<R: Rng>(rng: &mut R, max_len: usize, labels: usize) -> Phrase {
        let len = rng.random_range(0..=max_len);
        Phrase((0..len).map(|_| rng.random_range(0..labels)).collect())
    }

    /// Oracle: sum of alignment probabilities over the exhaustive enumeration.
    pub fn enumerated_prob(p: &Phrase, y: &LogitMatrix) -> f64 {
        enumerate_alignments(p, y.frames(), y.classes())
            .unwrap()
            .iter()
            .map(|a| alignment_prob(a, y).unwrap())
            .sum()
    }
}
