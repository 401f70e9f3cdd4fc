use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio_io::Waveform;
use crate::ctc::{Alphabet, CtcError, Phrase};
use crate::spectral::FEATURE_RATE;

/// 100 ms per character.
pub const CHAR_SAMPLES: usize = 1600;
/// 40 ms of silence after every character.
pub const GAP_SAMPLES: usize = 640;

/// Low tones sit on 512-point FFT bins 12..=36 (step 4), high tones on bins 44..=68
/// (step 8); every (low, high) pair names one alphabet label.
const LOW_BINS: [usize; 7] = [12, 16, 20, 24, 28, 32, 36];
const HIGH_BINS: [usize; 4] = [44, 52, 60, 68];
const BIN_HZ: f64 = FEATURE_RATE as f64 / 512.0;

const TONE_AMPLITUDE: f64 = 6000.0;
/// Uniform background noise, in sample units.
const NOISE_AMPLITUDE: f64 = 30.0;
const MIN_CHARS: usize = 2;
const MAX_CHARS: usize = 8;

/// A waveform with its transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub waveform: Waveform,
    pub transcript: String,
}

impl Utterance {
    pub fn phrase(&self, alphabet: &Alphabet) -> Result<Phrase, CtcError> {
        alphabet.encode(&self.transcript)
    }
}

/// The two tone frequencies (Hz) identifying a character of the English alphabet.
pub fn char_signature(c: char) -> Option<(f64, f64)> {
    let i = Alphabet::english().index_of(c)?;
    Some((
        LOW_BINS[i % LOW_BINS.len()] as f64 * BIN_HZ,
        HIGH_BINS[i / LOW_BINS.len()] as f64 * BIN_HZ,
    ))
}

/// Renders `text` as dual-tone characters, each followed by a silence gap, with a
/// seed-determined gain, tone phases and background noise.
pub fn synth_utterance(text: &str, seed: u64) -> Result<Utterance, CtcError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gain = rng.random_range(0.6..=1.0);
    let mut samples = Vec::with_capacity(text.chars().count() * (CHAR_SAMPLES + GAP_SAMPLES));
    for c in text.chars() {
        let (lo, hi) = char_signature(c).ok_or(CtcError::UnknownChar(c))?;
        let (p1, p2) = (
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        );
        for n in 0..CHAR_SAMPLES {
            let t = n as f64 / FEATURE_RATE as f64;
            let tone = (2.0 * PI * lo * t + p1).sin() + (2.0 * PI * hi * t + p2).sin();
            samples.push(gain * TONE_AMPLITUDE * tone);
        }
        samples.extend(std::iter::repeat_n(0.0, GAP_SAMPLES));
    }
    for s in samples.iter_mut() {
        *s += rng.random_range(-NOISE_AMPLITUDE..=NOISE_AMPLITUDE);
    }
    Ok(Utterance {
        id: String::new(),
        waveform: Waveform::from_f64(&samples, FEATURE_RATE).expect("positive rate"),
        transcript: text.to_string(),
    })
}

/// `n` utterances of 2-8 random letters, deterministic per seed.
pub fn synth_corpus(n: usize, seed: u64) -> Vec<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(MIN_CHARS..=MAX_CHARS);
            let text: String = (0..len)
                .map(|_| (b'a' + rng.random_range(0..26u8)) as char)
                .collect();
            let mut u = synth_utterance(&text, rng.random()).expect("letters are in the alphabet");
            u.id = format!("{seed}-{i:04}");
            u
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft, StftConfig};

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_corpus(5, 3), synth_corpus(5, 3));
        assert_ne!(synth_corpus(5, 3), synth_corpus(5, 4));
    }

    #[test]
    fn lengths_follow_construction() {
        for u in synth_corpus(20, 1) {
            let chars = u.transcript.chars().count();
            assert!((2..=8).contains(&chars));
            assert_eq!(u.waveform.len(), chars * (CHAR_SAMPLES + GAP_SAMPLES));
            assert_eq!(u.waveform.sample_rate(), 16000);
        }
    }

    #[test]
    fn signatures_have_distinct_peak_bins() {
        let abc = Alphabet::english();
        let mut seen = std::collections::HashSet::new();
        for &c in abc.labels() {
            let u = synth_utterance(&c.to_string(), 0).unwrap();
            let spec = stft(&u.waveform, StftConfig::PCA).unwrap();
            // frame 2 lies wholly inside the tone
            let mags: Vec<f64> = spec.frame(2).iter().map(|z| z.norm()).collect();
            let mut order: Vec<usize> = (0..mags.len()).collect();
            order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
            let mut pair = [order[0], order[1]];
            pair.sort();
            let (lo, hi) = char_signature(c).unwrap();
            assert_eq!(
                pair,
                [(lo / BIN_HZ) as usize, (hi / BIN_HZ) as usize],
                "{c:?}"
            );
            assert!(seen.insert(pair));
        }
        assert_eq!(seen.len(), 28);
    }
}
