//! A small recurrent CTC acoustic model with hand-written backpropagation through
//! time, its trainer, a synthetic dual-tone corpus and checkpoint persistence.
//!
//! The network is a single-layer tanh recurrence over normalized feature frames:
//!
//! ```text
//! x_t = (f_t - mean) * scale
//! h_t = tanh(W_in^T x_t + W_rec^T h_{t-1} + b_h)
//! y_t = softmax(W_out^T h_t + b_out)
//! ```

mod checkpoint;
mod corpus;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use corpus::{
    char_signature, synth_corpus, synth_utterance, Utterance, CHAR_SAMPLES, GAP_SAMPLES,
};
pub use train::{train, train_with_progress, TrainConfig, TrainError, TrainLog};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio_io::Waveform;
use crate::ctc::Phrase;
use crate::ctc::{softmax_in_place, Alphabet, LogitMatrix};
use crate::decode::beam_search_decode;
use crate::spectral::{extract_features, FeatureMatrix, SpectralError};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Features(#[from] SpectralError),
}

pub const DEFAULT_HIDDEN: usize = 64;
pub const INIT_RANGE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticModel {
    alphabet: Alphabet,
    feature_dim: usize,
    hidden: usize,
    /// Fixed input normalization, estimated from the training corpus.
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub params: Params,
}

/// Trainable weights, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `feature_dim x hidden`
    pub w_in: Vec<f64>,
    /// `hidden x hidden`
    pub w_rec: Vec<f64>,
    pub b_h: Vec<f64>,
    /// `hidden x classes`
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

impl Params {
    fn zeros(feature_dim: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w_in: vec![0.0; feature_dim * hidden],
            w_rec: vec![0.0; hidden * hidden],
            b_h: vec![0.0; hidden],
            w_out: vec![0.0; hidden * classes],
            b_out: vec![0.0; classes],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [&self.w_in, &self.w_rec, &self.b_h, &self.w_out, &self.b_out]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.w_in,
            &mut self.w_rec,
            &mut self.b_h,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, by: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= by);
        }
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<f64>,
    hidden: Vec<f64>,
    pub probs: LogitMatrix,
}

/// Gradients of a scalar loss with respect to weights and input features.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Params,
    pub features: FeatureMatrix,
}

impl AcousticModel {
    /// Weights uniform in `[-INIT_RANGE, INIT_RANGE]`, zero biases, identity normalization.
    pub fn init(alphabet: Alphabet, feature_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = alphabet.num_classes();
        let mut params = Params::zeros(feature_dim, hidden, classes);
        for t in [&mut params.w_in, &mut params.w_rec, &mut params.w_out] {
            t.iter_mut()
                .for_each(|v| *v = rng.random_range(-INIT_RANGE..=INIT_RANGE));
        }
        Self {
            alphabet,
            feature_dim,
            hidden,
            feature_mean: vec![0.0; feature_dim],
            feature_scale: vec![1.0; feature_dim],
            params,
        }
    }

    pub fn zeros(alphabet: Alphabet, feature_dim: usize, hidden: usize) -> Self {
        let classes = alphabet.num_classes();
        Self {
            alphabet,
            feature_dim,
            hidden,
            feature_mean: vec![0.0; feature_dim],
            feature_scale: vec![1.0; feature_dim],
            params: Params::zeros(feature_dim, hidden, classes),
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.alphabet.num_classes()
    }

    /// Sets the input normalization to per-dimension mean and inverse standard deviation.
    pub fn fit_normalization<'a>(&mut self, features: impl IntoIterator<Item = &'a FeatureMatrix>) {
        let d = self.feature_dim;
        let (mut sum, mut sq, mut n) = (vec![0.0; d], vec![0.0; d], 0usize);
        for f in features {
            for t in 0..f.num_frames() {
                for (i, &v) in f.row(t).iter().enumerate() {
                    sum[i] += v;
                    sq[i] += v * v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return;
        }
        for i in 0..d {
            let mean = sum[i] / n as f64;
            let var = (sq[i] / n as f64 - mean * mean).max(0.0);
            self.feature_mean[i] = mean;
            self.feature_scale[i] = 1.0 / var.sqrt().max(1e-3);
        }
    }

    fn check(&self, f: &FeatureMatrix) -> Result<(), ModelError> {
        if f.dim() != self.feature_dim {
            return Err(ModelError::ShapeMismatch(format!(
                "model expects {} features per frame, got {}",
                self.feature_dim,
                f.dim()
            )));
        }
        Ok(())
    }

    /// Beam-search transcription of a 16 kHz waveform.
    pub fn transcribe(&self, w: &Waveform, beam_width: usize) -> Result<Phrase, ModelError> {
        let y = self.forward(&extract_features(w)?)?;
        Ok(beam_search_decode(&y, beam_width).0)
    }

    pub fn transcribe_text(&self, w: &Waveform, beam_width: usize) -> Result<String, ModelError> {
        Ok(self.alphabet.decode(&self.transcribe(w, beam_width)?))
    }

    pub fn forward(&self, f: &FeatureMatrix) -> Result<LogitMatrix, ModelError> {
        self.forward_trace(f).map(|t| t.probs)
    }

    pub fn forward_trace(&self, f: &FeatureMatrix) -> Result<ForwardTrace, ModelError> {
        self.check(f)?;
        let (frames, d, h, c) = (
            f.num_frames(),
            self.feature_dim,
            self.hidden,
            self.classes(),
        );
        let p = &self.params;
        let mut inputs = vec![0.0; frames * d];
        let mut hidden = vec![0.0; frames * h];
        let mut probs = vec![0.0; frames * c];
        let mut pre = vec![0.0; h];
        for t in 0..frames {
            let x = &mut inputs[t * d..(t + 1) * d];
            for (i, v) in x.iter_mut().enumerate() {
                *v = (f.row(t)[i] - self.feature_mean[i]) * self.feature_scale[i];
            }
            pre.copy_from_slice(&p.b_h);
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    axpy(xi, &p.w_in[i * h..(i + 1) * h], &mut pre);
                }
            }
            if t > 0 {
                let (prev, _) = hidden.split_at(t * h);
                let prev = &prev[(t - 1) * h..];
                for (j, &hj) in prev.iter().enumerate() {
                    axpy(hj, &p.w_rec[j * h..(j + 1) * h], &mut pre);
                }
            }
            let ht = &mut hidden[t * h..(t + 1) * h];
            for (o, &a) in ht.iter_mut().zip(&pre) {
                *o = a.tanh();
            }
            let yt = &mut probs[t * c..(t + 1) * c];
            yt.copy_from_slice(&p.b_out);
            for (j, &hj) in ht.iter().enumerate() {
                axpy(hj, &p.w_out[j * c..(j + 1) * c], yt);
            }
            softmax_in_place(yt);
        }
        Ok(ForwardTrace {
            inputs,
            hidden,
            probs: LogitMatrix::new_unchecked(probs, frames, c),
        })
    }

    /// Backpropagation through time of `upstream = dL/dy` (same shape as the output).
    pub fn backward(&self, f: &FeatureMatrix, upstream: &[f64]) -> Result<Gradients, ModelError> {
        let trace = self.forward_trace(f)?;
        self.backward_from(&trace, upstream)
    }

    pub fn backward_from(
        &self,
        trace: &ForwardTrace,
        upstream: &[f64],
    ) -> Result<Gradients, ModelError> {
        let (d, h, c) = (self.feature_dim, self.hidden, self.classes());
        let frames = trace.probs.frames();
        if upstream.len() != frames * c {
            return Err(ModelError::ShapeMismatch(format!(
                "upstream has {} entries, expected {}",
                upstream.len(),
                frames * c
            )));
        }
        let p = &self.params;
        let mut g = Params::zeros(d, h, c);
        let mut features = FeatureMatrix::zeros(frames, d);
        let mut dz = vec![0.0; c];
        let mut dh = vec![0.0; h];
        let mut carry = vec![0.0; h];
        let mut da = vec![0.0; h];
        for t in (0..frames).rev() {
            let yt = trace.probs.row(t);
            let gt = &upstream[t * c..(t + 1) * c];
            // softmax Jacobian-vector product
            let dot: f64 = yt.iter().zip(gt).map(|(y, g)| y * g).sum();
            for k in 0..c {
                dz[k] = yt[k] * gt[k] - yt[k] * dot;
            }
            let ht = &trace.hidden[t * h..(t + 1) * h];
            for j in 0..h {
                axpy(ht[j], &dz, &mut g.w_out[j * c..(j + 1) * c]);
                dh[j] = carry[j] + dot_slice(&p.w_out[j * c..(j + 1) * c], &dz);
            }
            for k in 0..c {
                g.b_out[k] += dz[k];
            }
            for j in 0..h {
                da[j] = dh[j] * (1.0 - ht[j] * ht[j]);
                g.b_h[j] += da[j];
            }
            let xt = &trace.inputs[t * d..(t + 1) * d];
            let ft = features.row_mut(t);
            for i in 0..d {
                if xt[i] != 0.0 {
                    axpy(xt[i], &da, &mut g.w_in[i * h..(i + 1) * h]);
                }
                ft[i] = dot_slice(&p.w_in[i * h..(i + 1) * h], &da) * self.feature_scale[i];
            }
            if t > 0 {
                let prev = &trace.hidden[(t - 1) * h..t * h];
                for j in 0..h {
                    axpy(prev[j], &da, &mut g.w_rec[j * h..(j + 1) * h]);
                    carry[j] = dot_slice(&p.w_rec[j * h..(j + 1) * h], &da);
                }
            }
        }
        Ok(Gradients {
            params: g,
            features,
        })
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
