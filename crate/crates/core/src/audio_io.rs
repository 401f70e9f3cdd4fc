//! PCM WAV input/output, the [`Waveform`] container and peak-level metrics.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Errors produced while reading, writing or measuring waveforms.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated WAV data: declared {declared} bytes, found {found}")]
    Truncated { declared: usize, found: usize },
    #[error("waveform is silent (all samples zero)")]
    SilentInput,
    #[error("waveform length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("sample rate must be positive")]
    BadRate,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// Mono signed 16-bit PCM audio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waveform {
    samples: Vec<i16>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::BadRate);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Quantizes real-valued samples: rounds to nearest and clips to the int16 range.
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&s| quantize(s)).collect(), sample_rate)
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }

    pub fn peak(&self) -> i32 {
        self.samples
            .iter()
            .map(|&s| (s as i32).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }
}

/// Rounds and clips a real-valued sample into int16.
pub fn quantize(s: f64) -> i16 {
    if s.is_nan() {
        return 0;
    }
    s.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

const PCM_FORMAT: u16 = 1;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a RIFF/WAVE byte buffer holding 16-bit mono PCM.
pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWav("missing RIFF/WAVE magic".into()));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(AudioError::NotWav("fmt chunk too short".into()));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (audio_format, channels, rate, bits) =
                    format.ok_or_else(|| AudioError::NotWav("data chunk before fmt".into()))?;
                if audio_format != PCM_FORMAT {
                    return Err(AudioError::UnsupportedFormat(format!(
                        "audio format {audio_format} (only PCM is supported)"
                    )));
                }
                if channels != 1 {
                    return Err(AudioError::UnsupportedFormat(format!(
                        "{channels} channels (only mono is supported)"
                    )));
                }
                if bits != 16 {
                    return Err(AudioError::UnsupportedFormat(format!(
                        "{bits} bits per sample (only 16 is supported)"
                    )));
                }
                let available = bytes.len() - body;
                if size > available {
                    return Err(AudioError::Truncated {
                        declared: size,
                        found: available,
                    });
                }
                let samples = bytes[body..body + size - size % 2]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect();
                return Waveform::new(samples, rate)
                    .map_err(|_| AudioError::UnsupportedFormat("sample rate of 0 Hz".into()));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    match format {
        None => Err(AudioError::NotWav("missing fmt chunk".into())),
        Some(_) => Err(AudioError::NotWav("missing data chunk".into())),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    parse_wav(&bytes)
}

/// Encodes a waveform with the canonical 44-byte header.
pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &w.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_wav(w))?;
    f.flush()?;
    Ok(())
}

fn peak_db(peak: i64) -> f64 {
    20.0 * (peak as f64).log10()
}

/// Peak level in dB: `20 log10(max |x_i|)`.
pub fn db_level(w: &Waveform) -> Result<f64> {
    match w.peak() {
        0 => Err(AudioError::SilentInput),
        p => Ok(peak_db(p as i64)),
    }
}

/// Relative loudness of the perturbation `adversarial - original` against the original,
/// `dB(delta) - dB(original)`. Negative values mean a perturbation quieter than the signal.
///
/// A zero perturbation returns [`f64::NEG_INFINITY`].
pub fn distortion_db(original: &Waveform, adversarial: &Waveform) -> Result<f64> {
    if original.len() != adversarial.len() {
        return Err(AudioError::LengthMismatch(
            original.len(),
            adversarial.len(),
        ));
    }
    if original.sample_rate != adversarial.sample_rate {
        return Err(AudioError::RateMismatch(
            original.sample_rate,
            adversarial.sample_rate,
        ));
    }
    let signal = db_level(original)?;
    let delta_peak = original
        .samples
        .iter()
        .zip(&adversarial.samples)
        .map(|(&a, &b)| (b as i64 - a as i64).abs())
        .max()
        .unwrap_or(0);
    if delta_peak == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(peak_db(delta_peak) - signal)
}

/// Linear-interpolation resampling. Output length is `floor(len * target / source)`;
/// positions past the last input sample hold the last value.
pub fn resample_linear(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(AudioError::BadRate);
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let n = w.samples.len();
    let out_len = (n as u64 * target_rate as u64 / w.sample_rate as u64) as usize;
    let step = w.sample_rate as f64 / target_rate as f64;
    let samples = (0..out_len)
        .map(|j| {
            let pos = j as f64 * step;
            let i = (pos.floor() as usize).min(n - 1);
            let frac = pos - i as f64;
            let a = w.samples[i] as f64;
            let b = w.samples[(i + 1).min(n - 1)] as f64;
            quantize(a + (b - a) * frac)
        })
        .collect();
    Waveform::new(samples, target_rate)
}
