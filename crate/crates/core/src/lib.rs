//! Crafting and evaluating adversarial examples against CTC speech-to-text models.
//!
//! The crate covers the full pipeline: PCM WAV I/O, spectral analysis, a small
//! recurrent CTC acoustic model with hand-written backpropagation, exact CTC
//! scoring and decoding, white-box gradient attacks on waveforms, black-box PCA
//! component-reduction attacks, and a batch harness that evaluates them.

pub mod attack;
pub mod audio_io;
pub mod ctc;
pub mod decode;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pca;
pub mod spectral;
