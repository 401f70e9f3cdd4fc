use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{AcousticModel, Params, Utterance, DEFAULT_HIDDEN};
use crate::ctc::{ctc_loss_and_grad, Alphabet, CtcError, Phrase};
use crate::spectral::{extract_features, FeatureMatrix, SpectralError, FEATURE_DIM};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("loss became non-finite at epoch {0}")]
    DivergedLoss(usize),
    #[error("utterance {id}: {source}")]
    Ctc { id: String, source: CtcError },
    #[error("utterance {id}: {source}")]
    Features { id: String, source: SpectralError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Adam step size.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.005,
            batch_size: 4,
            hidden: DEFAULT_HIDDEN,
            clip_norm: 5.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Mean CTC loss over the corpus, measured while each epoch trains.
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    m: Params,
    v: Params,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(like: &Params) -> Self {
        let mut zero = like.clone();
        zero.scale(0.0);
        Self {
            m: zero.clone(),
            v: zero,
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let targets = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in targets.into_iter().zip(grad.tensors()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Trains a fresh model on `corpus` by minibatch gradient descent (Adam) on the
/// mean CTC loss, with global-norm gradient clipping. Deterministic per seed.
pub fn train(
    corpus: &[Utterance],
    config: &TrainConfig,
) -> Result<(AcousticModel, TrainLog), TrainError> {
    train_with_progress(corpus, config, |_, _| {})
}

pub fn train_with_progress(
    corpus: &[Utterance],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(AcousticModel, TrainLog), TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let alphabet = Alphabet::english();
    let mut data: Vec<(FeatureMatrix, Phrase)> = Vec::with_capacity(corpus.len());
    for u in corpus {
        let f = extract_features(&u.waveform).map_err(|source| TrainError::Features {
            id: u.id.clone(),
            source,
        })?;
        let p = u.phrase(&alphabet).map_err(|source| TrainError::Ctc {
            id: u.id.clone(),
            source,
        })?;
        if p.min_frames() > f.num_frames() {
            return Err(TrainError::Ctc {
                id: u.id.clone(),
                source: CtcError::ImpossibleTarget,
            });
        }
        data.push((f, p));
    }

    let mut model = AcousticModel::init(alphabet, FEATURE_DIM, config.hidden, config.seed);
    model.fit_normalization(data.iter().map(|(f, _)| f));
    let mut adam = Adam::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();
    let batch_size = config.batch_size.max(1);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let mut total: Option<Params> = None;
            for &i in batch {
                let (f, p) = &data[i];
                let trace = model.forward_trace(f).expect("feature dim matches");
                let (loss, dy) =
                    ctc_loss_and_grad(&trace.probs, p).map_err(|source| TrainError::Ctc {
                        id: corpus[i].id.clone(),
                        source,
                    })?;
                if !loss.is_finite() {
                    return Err(TrainError::DivergedLoss(epoch));
                }
                epoch_loss += loss;
                let g = model.backward_from(&trace, &dy).expect("shapes match");
                match total.as_mut() {
                    Some(t) => t.add_assign(&g.params),
                    None => total = Some(g.params),
                }
            }
            let mut grad = total.expect("non-empty batch");
            grad.scale(1.0 / batch.len() as f64);
            let norm = grad.norm();
            if !norm.is_finite() {
                return Err(TrainError::DivergedLoss(epoch));
            }
            if norm > config.clip_norm {
                grad.scale(config.clip_norm / norm);
            }
            adam.update(&mut model.params, &grad, config.learning_rate);
        }
        let mean = epoch_loss / data.len() as f64;
        log.epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }
    if !model.params.is_finite() {
        return Err(TrainError::DivergedLoss(config.epochs));
    }
    Ok((model, log))
}
