//! FFT, short-time analysis/synthesis, power spectra and the differentiable
//! log-power features consumed by the acoustic model.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio_io::{quantize, Waveform};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("FFT length {0} is not a power of two")]
    BadLength(usize),
    #[error("bad frame geometry: {0}")]
    BadGeometry(String),
    #[error("expected a {expected} Hz waveform, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Sample rate the feature pipeline is built around.
pub const FEATURE_RATE: u32 = 16_000;
/// 20 ms at 16 kHz, i.e. 50 frames per second.
pub const FEATURE_HOP: usize = 320;
pub const FEATURE_FFT: usize = 512;
pub const FEATURE_DIM: usize = FEATURE_FFT / 2 + 1;
/// Added to power before the log so silent bins stay finite.
pub const LOG_FLOOR: f64 = 1e-10;
/// Floor applied to power spectra before conversion to dB.
pub const POWER_DB_FLOOR: f64 = 1e-10;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn check_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(SpectralError::BadLength(n));
    }
    Ok(())
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    plan.process(buf);
}

/// `n`-point DFT of a real signal, zero-padded or truncated to `n`.
pub fn fft(x: &[f64], n: usize) -> Result<Vec<Complex64>> {
    check_pow2(n)?;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    fft_in_place(&mut buf, false);
    Ok(buf)
}

/// Unnormalized inverse DFT (`sum_k X_k e^{+2 pi i k n / N}`).
pub fn ifft(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    check_pow2(spectrum.len())?;
    let mut buf = spectrum.to_vec();
    fft_in_place(&mut buf, true);
    Ok(buf)
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Analysis geometry: `window_len` samples are windowed and zero-padded to `fft_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_len: usize,
    pub fft_len: usize,
    pub hop: usize,
}

impl StftConfig {
    /// Overlapping geometry used by the PCA pipeline (satisfies overlap-add for Hann).
    pub const PCA: StftConfig = StftConfig {
        window_len: 512,
        fft_len: 512,
        hop: 256,
    };
    /// Non-overlapping 20 ms frames used for model features.
    pub const FEATURES: StftConfig = StftConfig {
        window_len: FEATURE_HOP,
        fft_len: FEATURE_FFT,
        hop: FEATURE_HOP,
    };

    pub fn num_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Frames start at `t * hop` for every `t * hop < len`.
    pub fn num_frames(&self, len: usize) -> usize {
        len.div_ceil(self.hop).max(1)
    }

    fn validate(&self) -> Result<()> {
        check_pow2(self.fft_len).map_err(|_| {
            SpectralError::BadGeometry(format!("fft_len {} is not a power of two", self.fft_len))
        })?;
        if self.window_len == 0 || self.window_len > self.fft_len {
            return Err(SpectralError::BadGeometry(format!(
                "window_len {} must be in 1..={}",
                self.window_len, self.fft_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(SpectralError::BadGeometry(format!(
                "hop {} must be in 1..={}",
                self.hop, self.window_len
            )));
        }
        Ok(())
    }
}

/// Complex short-time spectrum, `num_frames x num_bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: Vec<Complex64>,
    num_frames: usize,
    config: StftConfig,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn new(
        frames: Vec<Complex64>,
        num_frames: usize,
        config: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        config.validate()?;
        if frames.len() != num_frames * config.num_bins() {
            return Err(SpectralError::ShapeMismatch {
                expected: (num_frames, config.num_bins()),
                actual: (frames.len() / config.num_bins().max(1), config.num_bins()),
            });
        }
        Ok(Self {
            frames,
            num_frames,
            config,
            sample_rate,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.config.num_bins()
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let b = self.num_bins();
        &self.frames[t * b..(t + 1) * b]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        let b = self.num_bins();
        &mut self.frames[t * b..(t + 1) * b]
    }

    /// Magnitudes as a row-major `num_frames x num_bins` matrix.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.frames.iter().map(|c| c.norm()).collect()
    }
}

fn stft_samples(x: &[f64], sample_rate: u32, config: StftConfig) -> Result<Spectrogram> {
    config.validate()?;
    if x.is_empty() {
        return Err(SpectralError::BadGeometry("empty waveform".into()));
    }
    let window = hann(config.window_len);
    let num_frames = config.num_frames(x.len());
    let bins = config.num_bins();
    let mut frames = Vec::with_capacity(num_frames * bins);
    let mut buf = vec![Complex64::default(); config.fft_len];
    for t in 0..num_frames {
        let start = t * config.hop;
        for (n, slot) in buf.iter_mut().enumerate() {
            let v = if n < config.window_len {
                x.get(start + n).copied().unwrap_or(0.0) * window[n]
            } else {
                0.0
            };
            *slot = Complex64::new(v, 0.0);
        }
        fft_in_place(&mut buf, false);
        frames.extend_from_slice(&buf[..bins]);
    }
    Spectrogram::new(frames, num_frames, config, sample_rate)
}

/// Hann-windowed short-time Fourier transform; the trailing partial frame is zero-padded.
pub fn stft(w: &Waveform, config: StftConfig) -> Result<Spectrogram> {
    stft_samples(&w.to_f64(), w.sample_rate(), config)
}

/// Weighted overlap-add inverse, normalized by the summed squared window.
/// Output length is `(num_frames - 1) * hop + window_len`.
pub fn istft_samples(s: &Spectrogram) -> Result<Vec<f64>> {
    let config = s.config;
    config.validate()?;
    let window = hann(config.window_len);
    let out_len = (s.num_frames.max(1) - 1) * config.hop + config.window_len;
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    let n = config.fft_len;
    let mut buf = vec![Complex64::default(); n];
    for t in 0..s.num_frames {
        let frame = s.frame(t);
        // Hermitian extension of the non-negative bins
        for k in 0..n {
            buf[k] = if k < frame.len() {
                frame[k]
            } else {
                frame[n - k].conj()
            };
        }
        fft_in_place(&mut buf, true);
        let start = t * config.hop;
        for i in 0..config.window_len {
            out[start + i] += window[i] * buf[i].re / n as f64;
            norm[start + i] += window[i] * window[i];
        }
    }
    for (o, w2) in out.iter_mut().zip(&norm) {
        if *w2 > 1e-10 {
            *o /= w2;
        }
    }
    Ok(out)
}

pub fn istft(s: &Spectrogram) -> Result<Waveform> {
    let samples = istft_samples(s)?;
    Ok(Waveform::new(
        samples.iter().map(|&v| quantize(v)).collect(),
        s.sample_rate,
    )
    .expect("spectrogram carries a positive sample rate"))
}

/// Whole-signal power spectrum in dB over the non-negative bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub bin_hz: Vec<f64>,
    pub power_db: Vec<f64>,
}

/// FFT of the whole signal, zero-padded to the next power of two.
pub fn power_spectrum(w: &Waveform) -> PowerSpectrum {
    let n = w.len().max(1).next_power_of_two();
    let spectrum = fft(&w.to_f64(), n).expect("power of two");
    let bins = n / 2 + 1;
    let rate = w.sample_rate() as f64;
    PowerSpectrum {
        bin_hz: (0..bins).map(|k| k as f64 * rate / n as f64).collect(),
        power_db: spectrum[..bins]
            .iter()
            .map(|c| 10.0 * c.norm_sqr().max(POWER_DB_FLOOR).log10())
            .collect(),
    }
}

/// Per-frame real feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    num_frames: usize,
    dim: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, num_frames: usize, dim: usize) -> Result<Self> {
        if data.len() != num_frames * dim {
            return Err(SpectralError::ShapeMismatch {
                expected: (num_frames, dim),
                actual: (data.len() / dim.max(1), dim),
            });
        }
        Ok(Self {
            data,
            num_frames,
            dim,
        })
    }

    pub fn zeros(num_frames: usize, dim: usize) -> Self {
        Self {
            data: vec![0.0; num_frames * dim],
            num_frames,
            dim,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_frames, self.dim)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

fn check_rate(rate: u32) -> Result<()> {
    if rate != FEATURE_RATE {
        return Err(SpectralError::WrongRate {
            expected: FEATURE_RATE,
            actual: rate,
        });
    }
    Ok(())
}

/// Log-power features on the real-valued relaxation of a waveform.
pub fn features_from_samples(x: &[f64]) -> Result<FeatureMatrix> {
    let spec = stft_samples(x, FEATURE_RATE, StftConfig::FEATURES)?;
    let data = spec
        .frames
        .iter()
        .map(|c| (c.norm_sqr() + LOG_FLOOR).ln())
        .collect();
    FeatureMatrix::new(data, spec.num_frames, FEATURE_DIM)
}

/// `ln(|FFT|^2 + LOG_FLOOR)` per bin for every 20 ms frame; 257 features per frame.
pub fn extract_features(w: &Waveform) -> Result<FeatureMatrix> {
    check_rate(w.sample_rate())?;
    features_from_samples(&w.to_f64())
}

/// Gradient of a scalar loss with respect to the (real-valued) samples, given the
/// loss gradient with respect to [`features_from_samples`].
pub fn feature_gradient_from_samples(x: &[f64], upstream: &FeatureMatrix) -> Result<Vec<f64>> {
    let config = StftConfig::FEATURES;
    let expected = (config.num_frames(x.len()), FEATURE_DIM);
    if x.is_empty() || upstream.shape() != expected {
        return Err(SpectralError::ShapeMismatch {
            expected,
            actual: upstream.shape(),
        });
    }
    let window = hann(config.window_len);
    let n = config.fft_len;
    let mut grad = vec![0.0; x.len()];
    let mut buf = vec![Complex64::default(); n];
    for t in 0..expected.0 {
        let g = upstream.row(t);
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let start = t * config.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < config.window_len {
                x.get(start + i).copied().unwrap_or(0.0) * window[i]
            } else {
                0.0
            };
            *slot = Complex64::new(v, 0.0);
        }
        fft_in_place(&mut buf, false);
        // d ln(P_k + floor) / dx_i = 2 w_i Re(X_k e^{+2 pi i k i / N}) / (P_k + floor)
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = if k < FEATURE_DIM {
                *slot * (g[k] / (slot.norm_sqr() + LOG_FLOOR))
            } else {
                Complex64::default()
            };
        }
        fft_in_place(&mut buf, true);
        for i in 0..config.window_len {
            if let Some(out) = grad.get_mut(start + i) {
                *out = 2.0 * window[i] * buf[i].re;
            }
        }
    }
    Ok(grad)
}

pub fn feature_gradient(w: &Waveform, upstream: &FeatureMatrix) -> Result<Vec<f64>> {
    check_rate(w.sample_rate())?;
    feature_gradient_from_samples(&w.to_f64(), upstream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let a = -2.0 * PI * (k * j % n) as f64 / n as f64;
                        Complex64::new(v * a.cos(), v * a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn tone(freq: f64, amp: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / 16000.0).sin())
            .collect()
    }

    #[test]
    fn fft_small_cases() {
        let impulse = fft(&[1.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert!(impulse
            .iter()
            .all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let dc = fft(&[1.0; 4], 4).unwrap();
        assert!((dc[0] - Complex64::new(4.0, 0.0)).norm() < 1e-12);
        assert!(dc[1..].iter().all(|c| c.norm() < 1e-12));
        assert_eq!(fft(&[1.0], 6), Err(SpectralError::BadLength(6)));
    }

    #[test]
    fn fft_matches_naive_dft_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for log_n in 1..=8 {
            let n = 1 << log_n;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = fft(&x, n).unwrap();
            let slow = naive_dft(&x);
            let scale = slow.iter().map(|c| c.norm()).fold(1e-300, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() / scale < 1e-9, "n={n}");
            }
            let energy: f64 = fast.iter().map(|c| c.norm_sqr()).sum();
            let time: f64 = x.iter().map(|v| v * v).sum::<f64>() * n as f64;
            assert!((energy - time).abs() / time < 1e-9);
        }
    }

    #[test]
    fn stft_geometry() {
        let zeros = Waveform::new(vec![0; 320], 16000).unwrap();
        let s = stft(&zeros, StftConfig::FEATURES).unwrap();
        assert_eq!(s.num_frames(), 1);
        assert_eq!(s.num_bins(), 257);
        assert!(s.frame(0).iter().all(|c| c.norm() == 0.0));
        let x = Waveform::new(vec![1; 640], 16000).unwrap();
        assert_eq!(stft(&x, StftConfig::FEATURES).unwrap().num_frames(), 2);
        let bad = StftConfig {
            window_len: 300,
            fft_len: 300,
            hop: 100,
        };
        assert!(matches!(stft(&x, bad), Err(SpectralError::BadGeometry(_))));
        let empty = Waveform::new(vec![], 16000).unwrap();
        assert!(stft(&empty, StftConfig::PCA).is_err());
    }

    #[test]
    fn tone_peaks_at_predicted_bin() {
        let w = Waveform::from_f64(&tone(1000.0, 8000.0, 4096), 16000).unwrap();
        let s = stft(&w, StftConfig::PCA).unwrap();
        let expected = (1000.0f64 * 512.0 / 16000.0).round() as usize;
        assert_eq!(expected, 32);
        // skip the zero-padded tail frames
        for t in 0..(4096 - 512) / 256 {
            let mags: Vec<f64> = s.frame(t).iter().map(|c| c.norm()).collect();
            let peak = (0..mags.len())
                .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
                .unwrap();
            assert_eq!(peak, expected, "frame {t}");
        }
    }

    #[test]
    fn istft_round_trip_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..16000)
            .map(|_| rng.random_range(-10000.0..10000.0))
            .collect();
        let s = stft_samples(&x, 16000, StftConfig::PCA).unwrap();
        let y = istft_samples(&s).unwrap();
        let interior = 512..16000 - 512;
        let err: f64 = interior.clone().map(|i| (x[i] - y[i]).powi(2)).sum();
        let sig: f64 = interior.map(|i| x[i].powi(2)).sum();
        assert!((err / sig).sqrt() < 1e-3);
    }

    #[test]
    fn istft_single_frame_and_zero() {
        let zero = Spectrogram::new(
            vec![Complex64::default(); 3 * 257],
            3,
            StftConfig::PCA,
            16000,
        )
        .unwrap();
        assert!(istft_samples(&zero).unwrap().iter().all(|&v| v == 0.0));

        let x: Vec<f64> = (0..512).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
        let s = stft_samples(&x, 16000, StftConfig::PCA).unwrap();
        let single = Spectrogram::new(s.frame(0).to_vec(), 1, StftConfig::PCA, 16000).unwrap();
        let y = istft_samples(&single).unwrap();
        let w = hann(512);
        for i in 1..512 {
            // w * (w x) / w^2
            assert!((y[i] - x[i]).abs() < 1e-9 * (1.0 + x[i].abs()), "i={i}");
            assert!(w[i] > 0.0);
        }
    }

    #[test]
    fn power_spectrum_cases() {
        let c = Waveform::new(vec![100; 256], 16000).unwrap();
        let p = power_spectrum(&c);
        assert!(p.power_db[1..].iter().all(|&v| v <= p.power_db[0] - 100.0));
        let z = Waveform::new(vec![0; 256], 16000).unwrap();
        assert!(power_spectrum(&z).power_db.iter().all(|&v| v == -100.0));

        // tones centred on bins 16 and 80 of a 1024-point transform
        let (f1, f2) = (16.0 * 16000.0 / 1024.0, 80.0 * 16000.0 / 1024.0);
        let x: Vec<f64> = tone(f1, 5000.0, 1024)
            .iter()
            .zip(tone(f2, 3000.0, 1024))
            .map(|(a, b)| a + b)
            .collect();
        let p = power_spectrum(&Waveform::from_f64(&x, 16000).unwrap());
        let mut order: Vec<usize> = (0..p.power_db.len()).collect();
        order.sort_by(|&a, &b| p.power_db[b].total_cmp(&p.power_db[a]));
        let mut top = [order[0], order[1]];
        top.sort();
        assert_eq!(top, [16, 80]);
        assert_eq!(p.bin_hz[16], f1);
    }

    #[test]
    fn features_geometry_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = Waveform::new(vec![0; 16000], 16000).unwrap();
        let f = extract_features(&w).unwrap();
        assert_eq!(f.shape(), (50, 257));
        assert!(f.as_slice().iter().all(|&v| v == LOG_FLOOR.ln()));
        for len in [1, 319, 320, 321, 1000] {
            let f = features_from_samples(&vec![1.0; len]).unwrap();
            assert_eq!(f.num_frames(), len.div_ceil(320));
        }
        let x: Vec<f64> = (0..960)
            .map(|_| rng.random_range(-3000.0..3000.0))
            .collect();
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let (a, b) = (
            features_from_samples(&x).unwrap(),
            features_from_samples(&doubled).unwrap(),
        );
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            // the floor is negligible against these powers
            assert!((v - u - 4f64.ln()).abs() < 1e-6);
        }
        let w8k = Waveform::new(vec![1; 100], 8000).unwrap();
        assert!(matches!(
            extract_features(&w8k),
            Err(SpectralError::WrongRate { .. })
        ));
    }

    #[test]
    fn gradient_zero_and_locality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..900)
            .map(|_| rng.random_range(-2000.0..2000.0))
            .collect();
        let zero = FeatureMatrix::zeros(3, FEATURE_DIM);
        assert!(feature_gradient_from_samples(&x, &zero)
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
        let mut up = FeatureMatrix::zeros(3, FEATURE_DIM);
        up.row_mut(1)
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-1.0..1.0));
        let g = feature_gradient_from_samples(&x, &up).unwrap();
        assert!(g[..320].iter().all(|&v| v == 0.0));
        assert!(g[640..].iter().all(|&v| v == 0.0));
        assert!(g[320..640].iter().any(|&v| v != 0.0));
        assert!(feature_gradient_from_samples(&x, &FeatureMatrix::zeros(2, FEATURE_DIM)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let seed = 21;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..700)
            .map(|_| rng.random_range(-3000.0..3000.0))
            .collect();
        let frames = 700usize.div_ceil(320);
        let up_data: Vec<f64> = (0..frames * FEATURE_DIM)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let up = FeatureMatrix::new(up_data, frames, FEATURE_DIM).unwrap();
        let loss = |x: &[f64]| -> f64 {
            let f = features_from_samples(x).unwrap();
            f.as_slice()
                .iter()
                .zip(up.as_slice())
                .map(|(a, b)| a * b)
                .sum()
        };
        let g = feature_gradient_from_samples(&x, &up).unwrap();
        let h = 1.0;
        for i in (0..700).step_by(7) {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            if g[i].abs() > 1e-8 {
                assert!(
                    (fd - g[i]).abs() / g[i].abs().max(fd.abs()) < 1e-3,
                    "seed {seed} i={i} fd={fd} g={}",
                    g[i]
                );
            }
        }
    }
}
