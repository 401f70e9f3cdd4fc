//! White-box targeted attacks: fixed-step gradient descent on the waveform that
//! minimizes the CTC loss of a chosen target phrase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio_io::{distortion_db, quantize, AudioError, Waveform};
use crate::ctc::{ctc_loss_and_grad, CtcError, Phrase};
use crate::decode::{beam_search_decode, DEFAULT_BEAM_WIDTH};
use crate::model::{AcousticModel, ModelError};
use crate::spectral::{
    feature_gradient_from_samples, features_from_samples, SpectralError, FEATURE_HOP, FEATURE_RATE,
};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("target needs at least {needed} frames, input has {available}")]
    InfeasibleTarget { needed: usize, available: usize },
    #[error("attacks need {FEATURE_RATE} Hz input, got {0} Hz")]
    WrongRate(u32),
    #[error("bad attack config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Ctc(#[from] CtcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub target: Phrase,
    pub max_iterations: usize,
    /// Per-sample step in int16 units, halved after long plateaus.
    pub learning_rate: f64,
    pub success_check_interval: usize,
    pub beam_width: usize,
    /// Seeds the dither used when the input has no usable gradient (digital silence).
    pub seed: u64,
}

impl AttackConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 5000;
    pub const DEFAULT_LEARNING_RATE: f64 = 2.0;
    pub const DEFAULT_CHECK_INTERVAL: usize = 50;

    pub fn new(target: Phrase) -> Self {
        Self {
            target,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            success_check_interval: Self::DEFAULT_CHECK_INTERVAL,
            beam_width: DEFAULT_BEAM_WIDTH,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), AttackError> {
        if self.max_iterations == 0 {
            return Err(AttackError::BadConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AttackError::BadConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.success_check_interval == 0 || self.beam_width == 0 {
            return Err(AttackError::BadConfig(
                "check interval and beam width must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub adversarial: Waveform,
    pub success: bool,
    /// Gradient steps taken before the returned waveform was produced.
    pub iterations_used: usize,
    /// `NEG_INFINITY` when the input is returned unchanged.
    pub distortion_db: f64,
    pub decoded: Phrase,
    /// Best CTC loss seen so far, one entry per evaluated iterate.
    pub loss_trace: Vec<f64>,
}

fn decode_quantized(
    m: &AcousticModel,
    x: &[f64],
    beam: usize,
) -> Result<(Vec<i16>, Phrase), AttackError> {
    let q: Vec<i16> = x.iter().map(|&v| quantize(v)).collect();
    let real: Vec<f64> = q.iter().map(|&s| s as f64).collect();
    let y = m.forward(&features_from_samples(&real)?)?;
    Ok((q, beam_search_decode(&y, beam).0))
}

fn loss_and_gradient(
    m: &AcousticModel,
    x: &[f64],
    target: &Phrase,
) -> Result<(f64, Vec<f64>), AttackError> {
    let f = features_from_samples(x)?;
    let trace = m.forward_trace(&f)?;
    let (loss, dy) = ctc_loss_and_grad(&trace.probs, target)?;
    let g = m.backward_from(&trace, &dy)?;
    Ok((loss, feature_gradient_from_samples(x, &g.features)?))
}

/// Perturbs `x` until the model's beam-search transcript equals `cfg.target`.
///
/// Each step moves every sample by `learning_rate` against the sign of its
/// gradient, halving after a long plateau, and is clamped to the int16 range.
/// Success is only ever declared on the quantized waveform.
pub fn targeted_attack(
    m: &AcousticModel,
    x: &Waveform,
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    if x.sample_rate() != FEATURE_RATE {
        return Err(AttackError::WrongRate(x.sample_rate()));
    }
    let available = x.len().div_ceil(FEATURE_HOP).max(1);
    let needed = cfg.target.min_frames();
    if needed > available {
        return Err(AttackError::InfeasibleTarget { needed, available });
    }
    let classes = m.classes();
    if let Some(&l) = cfg.target.labels().iter().find(|&&l| l + 1 >= classes) {
        return Err(CtcError::InvalidLabel(l).into());
    }

    let finish = |q: Vec<i16>,
                  success,
                  iterations_used,
                  decoded,
                  loss_trace|
     -> Result<AttackResult, AttackError> {
        let adversarial = Waveform::new(q, x.sample_rate()).expect("rate already checked");
        let distortion_db = match distortion_db(x, &adversarial) {
            // any change to digital silence is infinitely loud relative to it
            Err(AudioError::SilentInput) if adversarial != *x => f64::INFINITY,
            Err(AudioError::SilentInput) => f64::NEG_INFINITY,
            other => other?,
        };
        Ok(AttackResult {
            adversarial,
            success,
            iterations_used,
            distortion_db,
            decoded,
            loss_trace,
        })
    };

    let mut cur = x.to_f64();
    let (q, decoded) = decode_quantized(m, &cur, cfg.beam_width)?;
    if decoded == cfg.target {
        let (loss, _) = loss_and_gradient(m, &cur, &cfg.target)?;
        return finish(q, true, 0, decoded, vec![loss]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.max_iterations);
    let mut best = f64::INFINITY;
    // the step halves after this many iterations without a new best loss
    const PATIENCE: usize = 200;
    let (mut since, mut scale) = (0usize, 1.0f64);
    for it in 1..=cfg.max_iterations {
        let (loss, mut g) = loss_and_gradient(m, &cur, &cfg.target)?;
        if loss < best {
            best = loss;
            since = 0;
        } else {
            since += 1;
            if since >= PATIENCE {
                scale = (scale * 0.5).max(1.0 / 16.0);
                since = 0;
            }
        }
        trace.push(best);
        if loss.is_nan() {
            break;
        }
        if g.iter().all(|v| *v == 0.0) {
            // flat region: a dither of one quantization step gives the spectrum a phase
            g = (0..cur.len())
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
        }
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let step = cfg.learning_rate * scale;
        for (v, gi) in cur.iter_mut().zip(&g) {
            let dir = if *gi == 0.0 { 0.0 } else { gi.signum() };
            *v = (*v - step * dir).clamp(i16::MIN as f64, i16::MAX as f64);
        }
        if it % cfg.success_check_interval == 0 || it == cfg.max_iterations {
            let (q, decoded) = decode_quantized(m, &cur, cfg.beam_width)?;
            if decoded == cfg.target || it == cfg.max_iterations {
                let success = decoded == cfg.target;
                return finish(q, success, it, decoded, trace);
            }
        }
    }
    let (q, decoded) = decode_quantized(m, &cur, cfg.beam_width)?;
    let success = decoded == cfg.target;
    finish(q, success, trace.len(), decoded, trace)
}

/// Targets the empty transcript.
pub fn silence_attack(
    m: &AcousticModel,
    x: &Waveform,
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    let cfg = AttackConfig {
        target: Phrase::empty(),
        ..cfg.clone()
    };
    targeted_attack(m, x, &cfg)
}

/// Plants `cfg.target` into an arbitrary carrier such as music.
pub fn embed_in_carrier(
    m: &AcousticModel,
    carrier: &Waveform,
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    targeted_attack(m, carrier, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::Alphabet;
    use crate::model::{synth_corpus, synth_utterance, train, TrainConfig};
    use std::sync::OnceLock;

    fn model() -> &'static AcousticModel {
        static MODEL: OnceLock<AcousticModel> = OnceLock::new();
        MODEL.get_or_init(|| {
            train(&synth_corpus(200, 11), &TrainConfig::default())
                .unwrap()
                .0
        })
    }

    fn cfg(target: &str) -> AttackConfig {
        AttackConfig::new(Alphabet::english().encode(target).unwrap())
    }

    #[test]
    fn already_decoding_target_returns_immediately() {
        let m = model();
        let u = synth_utterance("dog", 3).unwrap();
        let now = m.transcribe(&u.waveform, 32).unwrap();
        let r = targeted_attack(m, &u.waveform, &AttackConfig::new(now.clone())).unwrap();
        assert!(r.success);
        assert_eq!(r.iterations_used, 0);
        assert_eq!(r.distortion_db, f64::NEG_INFINITY);
        assert_eq!(r.adversarial, u.waveform);
        assert_eq!(r.decoded, now);
    }

    #[test]
    fn targeted_attack_reaches_target() {
        let m = model();
        let u = synth_utterance("hello", 9).unwrap();
        let r = targeted_attack(m, &u.waveform, &cfg("evil")).unwrap();
        assert!(r.success, "decoded {:?}", m.alphabet().decode(&r.decoded));
        assert_eq!(m.transcribe_text(&r.adversarial, 32).unwrap(), "evil");
        assert!(r.distortion_db < 0.0, "{}", r.distortion_db);
        assert_eq!(r.adversarial.len(), u.waveform.len());
        assert!(r.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn silence_attack_empties_transcript() {
        let m = model();
        let u = synth_utterance("cat", 4).unwrap();
        let r = silence_attack(m, &u.waveform, &cfg("zzz")).unwrap();
        assert!(r.success);
        assert!(r.decoded.is_empty());
        assert!(r.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn silent_carrier_runs_and_reports_honestly() {
        let m = model();
        let silence = Waveform::new(vec![0; 8000], 16000).unwrap();
        let r = embed_in_carrier(
            m,
            &silence,
            &AttackConfig {
                max_iterations: 100,
                ..cfg("evil")
            },
        )
        .unwrap();
        assert_eq!(r.adversarial.len(), 8000);
        assert_eq!(r.success, r.decoded == cfg("evil").target);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = model();
        let short = Waveform::new(vec![100; 640], 16000).unwrap();
        assert!(matches!(
            targeted_attack(m, &short, &cfg("evil")),
            Err(AttackError::InfeasibleTarget {
                needed: 4,
                available: 2
            })
        ));
        let wrong = Waveform::new(vec![100; 8000], 8000).unwrap();
        assert!(matches!(
            targeted_attack(m, &wrong, &cfg("a")),
            Err(AttackError::WrongRate(8000))
        ));
        let zero = AttackConfig {
            max_iterations: 0,
            ..cfg("a")
        };
        assert!(matches!(
            targeted_attack(m, &short, &zero),
            Err(AttackError::BadConfig(_))
        ));
    }

    #[test]
    fn deterministic() {
        let m = model();
        let u = synth_utterance("ab", 2).unwrap();
        let c = AttackConfig {
            max_iterations: 60,
            ..cfg("xy")
        };
        assert_eq!(
            targeted_attack(m, &u.waveform, &c).unwrap(),
            targeted_attack(m, &u.waveform, &c).unwrap()
        );
    }
}
