//! Browser demo over the advaudio core.
//!
//! Three views, each a plain Rust function returning a serializable struct:
//! PCA retention on a synthetic utterance, a toy CTC lattice, and the string
//! metrics. The `#[wasm_bindgen]` wrappers at the bottom hand them to JavaScript
//! as JSON.

use advaudio::audio_io::{distortion_db, encode_wav, Waveform};
use advaudio::ctc::{
    alignment_prob, enumerate_alignments, phrase_prob, reduce, Alignment, Alphabet, LogitMatrix,
    Phrase,
};
use advaudio::decode::{beam_search_decode, greedy_decode};
use advaudio::metrics;
use advaudio::model::synth_utterance;
use advaudio::pca::{pca_transform, RetentionMode, RetentionPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Samples per envelope point in [`PcaView`].
pub const ENVELOPE_BLOCK: usize = 160;

/// Labels of the toy CTC alphabet; `-` is the blank.
pub const TOY_LABELS: [char; 2] = ['a', 'b'];
pub const TOY_BLANK: char = '-';
/// Longest lattice the playground enumerates.
pub const MAX_TOY_FRAMES: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct PcaView {
    pub text: String,
    pub k: usize,
    pub max_k: usize,
    pub frames: usize,
    /// Cumulative explained variance after each component.
    pub cumulative_variance: Vec<f64>,
    pub distortion_db: f64,
    /// Peak absolute sample per block of [`ENVELOPE_BLOCK`] samples.
    pub original_envelope: Vec<i32>,
    pub reduced_envelope: Vec<i32>,
}

fn envelope(w: &Waveform) -> Vec<i32> {
    w.samples()
        .chunks(ENVELOPE_BLOCK)
        .map(|c| c.iter().map(|&s| (s as i32).abs()).max().unwrap_or(0))
        .collect()
}

fn policy(retention: f64, mode: &str) -> Result<RetentionPolicy, String> {
    let mode: RetentionMode = mode.parse()?;
    RetentionPolicy::new(mode, retention).map_err(|e| e.to_string())
}

fn reduced(
    text: &str,
    seed: u64,
    retention: f64,
    mode: &str,
) -> Result<(Waveform, advaudio::pca::PcaTransform), String> {
    let utt = synth_utterance(text, seed).map_err(|e| e.to_string())?;
    let t = pca_transform(&utt.waveform, policy(retention, mode)?).map_err(|e| e.to_string())?;
    Ok((utt.waveform, t))
}

/// Synthesizes `text` and keeps `retention` of its spectral components.
pub fn pca_view(text: &str, seed: u64, retention: f64, mode: &str) -> Result<PcaView, String> {
    let (original, t) = reduced(text, seed, retention, mode)?;
    let eig = t.basis.eigenvalues();
    let total: f64 = eig.iter().sum();
    let mut acc = 0.0;
    let cumulative_variance = eig
        .iter()
        .map(|l| {
            acc += l;
            if total > 0.0 {
                acc / total
            } else {
                1.0
            }
        })
        .collect();
    Ok(PcaView {
        text: text.to_string(),
        k: t.k,
        max_k: t.basis.max_k(),
        frames: t.basis.observations(),
        cumulative_variance,
        distortion_db: distortion_db(&original, &t.output).map_err(|e| e.to_string())?,
        original_envelope: envelope(&original),
        reduced_envelope: envelope(&t.output),
    })
}

/// WAV bytes of the synthetic utterance, reduced unless `retention` is `None`.
pub fn pca_wav(
    text: &str,
    seed: u64,
    retention: Option<f64>,
    mode: &str,
) -> Result<Vec<u8>, String> {
    match retention {
        None => Ok(encode_wav(
            &synth_utterance(text, seed)
                .map_err(|e| e.to_string())?
                .waveform,
        )),
        Some(p) => Ok(encode_wav(&reduced(text, seed, p, mode)?.1.output)),
    }
}

fn toy_alphabet() -> Alphabet {
    Alphabet::new(&TOY_LABELS).expect("distinct labels")
}

fn toy_token(c: char) -> Result<usize, String> {
    if c == TOY_BLANK {
        return Ok(TOY_LABELS.len());
    }
    toy_alphabet()
        .index_of(c)
        .ok_or_else(|| format!("{c:?} is not one of a, b, -"))
}

fn toy_string(a: &Alignment) -> String {
    a.0.iter()
        .map(|&t| TOY_LABELS.get(t).copied().unwrap_or(TOY_BLANK))
        .collect()
}

/// Collapses repeats, then drops blanks: `aa-ab` becomes `aab`.
pub fn reduce_alignment(alignment: &str) -> Result<String, String> {
    let tokens = alignment
        .chars()
        .map(toy_token)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(toy_alphabet().decode(&reduce(&Alignment(tokens), TOY_LABELS.len())))
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentRow {
    pub alignment: String,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CtcView {
    pub target: String,
    /// Per-frame distribution over `a`, `b`, blank.
    pub probs: Vec<Vec<f64>>,
    /// Forward-algorithm probability of the target.
    pub phrase_prob: f64,
    /// Sum over the enumerated alignments; agrees with `phrase_prob`.
    pub enumerated_prob: f64,
    pub alignments: Vec<AlignmentRow>,
    pub greedy: String,
    pub beam: String,
}

/// Random `frames`-by-3 distribution drawn from `seed`, scored against `target`.
pub fn ctc_view(target: &str, frames: usize, seed: u64) -> Result<CtcView, String> {
    if frames == 0 || frames > MAX_TOY_FRAMES {
        return Err(format!("frames must be between 1 and {MAX_TOY_FRAMES}"));
    }
    let alphabet = toy_alphabet();
    let phrase: Phrase = alphabet.encode(target).map_err(|e| e.to_string())?;
    let classes = alphabet.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores: Vec<f64> = (0..frames * classes)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let y = LogitMatrix::from_scores(&scores, frames, classes).map_err(|e| e.to_string())?;

    let mut alignments = enumerate_alignments(&phrase, frames, classes)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|a| {
            let prob = alignment_prob(&a, &y).map_err(|e| e.to_string())?;
            Ok(AlignmentRow {
                alignment: toy_string(&a),
                prob,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let enumerated_prob = alignments.iter().map(|r| r.prob).sum();
    alignments.sort_by(|a, b| {
        b.prob
            .total_cmp(&a.prob)
            .then_with(|| a.alignment.cmp(&b.alignment))
    });

    Ok(CtcView {
        target: target.to_string(),
        probs: (0..frames).map(|t| y.row(t).to_vec()).collect(),
        phrase_prob: phrase_prob(&phrase, &y).map_err(|e| e.to_string())?,
        enumerated_prob,
        alignments,
        greedy: alphabet.decode(&greedy_decode(&y)),
        beam: alphabet.decode(&beam_search_decode(&y, 8).0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsView {
    pub edit_distance: usize,
    pub normalized_edit_distance: Option<f64>,
    pub matching_characters: usize,
    pub similarity: f64,
    pub word_error_rate: Option<f64>,
}

/// Every transcript metric for a reference `a` and hypothesis `b`; metrics that are
/// undefined for the inputs come back as `None`.
pub fn metrics_view(a: &str, b: &str) -> MetricsView {
    MetricsView {
        edit_distance: metrics::edit_distance(a, b),
        normalized_edit_distance: metrics::normalized_edit_distance(a, b).ok(),
        matching_characters: metrics::matching_characters(a, b),
        similarity: metrics::similarity(a, b),
        word_error_rate: metrics::word_error_rate(a, b).ok(),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = pcaView)]
pub fn pca_view_js(text: &str, seed: u32, retention: f64, mode: &str) -> Result<String, JsError> {
    to_json(&pca_view(text, seed as u64, retention, mode).map_err(js)?)
}

/// Pass a negative `retention` for the untouched utterance.
#[wasm_bindgen(js_name = pcaWav)]
pub fn pca_wav_js(text: &str, seed: u32, retention: f64, mode: &str) -> Result<Vec<u8>, JsError> {
    let p = (retention >= 0.0).then_some(retention);
    pca_wav(text, seed as u64, p, mode).map_err(js)
}

#[wasm_bindgen(js_name = reduceAlignment)]
pub fn reduce_alignment_js(alignment: &str) -> Result<String, JsError> {
    reduce_alignment(alignment).map_err(js)
}

#[wasm_bindgen(js_name = ctcView)]
pub fn ctc_view_js(target: &str, frames: u32, seed: u32) -> Result<String, JsError> {
    to_json(&ctc_view(target, frames as usize, seed as u64).map_err(js)?)
}

#[wasm_bindgen(js_name = metricsView)]
pub fn metrics_view_js(a: &str, b: &str) -> Result<String, JsError> {
    to_json(&metrics_view(a, b))
}
