//! Principal component analysis over spectrogram magnitude frames, and the
//! component-reduction transform applied to waveforms.
//!
//! The transform keeps the original STFT phase: magnitudes are projected onto the
//! leading principal components, clamped non-negative, recombined with the
//! original phase and resynthesized by overlap-add.

use thiserror::Error;

use crate::audio_io::{quantize, Waveform};
use crate::linalg::{jacobi_eigen, Matrix};
use crate::spectral::{self, istft_samples, Spectrogram, StftConfig, FEATURE_RATE};

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 observations, got {0}")]
    TooFewRows(usize),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("component count {k} outside 1..={max}")]
    BadK { k: usize, max: usize },
    #[error("matrix has {actual} columns, basis expects {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("retention fraction {0} outside (0, 1]")]
    BadRetention(f64),
    #[error("waveform too short: {0} samples give fewer than 2 analysis frames")]
    TooShort(usize),
    #[error("expected a {expected} Hz waveform, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
}

pub type Result<T> = std::result::Result<T, PcaError>;

/// Eigenvalues are clamped to zero above this negative rounding noise.
const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    mean: Vec<f64>,
    /// `dim x dim`, column `j` is component `j`.
    components: Matrix,
    /// Descending, non-negative.
    eigenvalues: Vec<f64>,
    observations: usize,
}

impl PcaBasis {
    /// Assembles a basis from precomputed parts. Eigenvalues must be descending.
    pub fn from_parts(
        mean: Vec<f64>,
        components: Matrix,
        eigenvalues: Vec<f64>,
        observations: usize,
    ) -> Result<Self> {
        let dim = mean.len();
        if components.rows() != dim || components.cols() != dim || eigenvalues.len() != dim {
            return Err(PcaError::ShapeMismatch {
                expected: dim,
                actual: components.cols(),
            });
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
            observations,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn num_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    /// Component `j` as a vector.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.components.column(j)
    }

    /// Largest usable component count: the centered data has rank at most
    /// `observations - 1`.
    pub fn max_k(&self) -> usize {
        self.num_components()
            .min(self.observations.saturating_sub(1))
            .max(1)
    }
}

/// How much of the basis a reconstruction keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RetentionMode {
    /// Cumulative share of explained variance.
    #[default]
    VarianceFraction,
    /// Share of the component count.
    ComponentFraction,
}

impl std::str::FromStr for RetentionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "variance" => Ok(Self::VarianceFraction),
            "components" => Ok(Self::ComponentFraction),
            other => Err(format!(
                "unknown retention mode {other:?} (expected variance|components)"
            )),
        }
    }
}

impl std::fmt::Display for RetentionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::VarianceFraction => "variance",
            Self::ComponentFraction => "components",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetentionPolicy {
    mode: RetentionMode,
    fraction: f64,
}

impl RetentionPolicy {
    pub fn new(mode: RetentionMode, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(PcaError::BadRetention(fraction));
        }
        Ok(Self { mode, fraction })
    }

    pub fn variance(fraction: f64) -> Result<Self> {
        Self::new(RetentionMode::VarianceFraction, fraction)
    }

    pub fn components(fraction: f64) -> Result<Self> {
        Self::new(RetentionMode::ComponentFraction, fraction)
    }

    pub fn mode(&self) -> RetentionMode {
        self.mode
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

/// Fits a basis to `frames` (rows are observations): mean-centred population
/// covariance, diagonalized by cyclic Jacobi, components sorted by descending
/// eigenvalue with ties kept in original order.
pub fn fit_pca(frames: &Matrix) -> Result<PcaBasis> {
    let (n, dim) = (frames.rows(), frames.cols());
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    if frames.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(PcaError::NonFinite);
    }
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(frames.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = Matrix::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for i in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(frames.row(i)).zip(&mean) {
            *c = v - m;
        }
        for a in 0..dim {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            let row = cov.row_mut(a);
            for b in a..dim {
                row[b] += ca * centered[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..dim).collect();
    // stable: tied eigenvalues keep their original index order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let eigenvalues = order
        .iter()
        .map(|&j| {
            let l = eig.eigenvalues[j];
            debug_assert!(l >= -NEGATIVE_EIGEN_TOLERANCE * scale, "eigenvalue {l}");
            l.max(0.0)
        })
        .collect();
    let mut components = Matrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..dim {
            components[(i, dst)] = eig.eigenvectors[(i, src)];
        }
    }
    Ok(PcaBasis {
        mean,
        components,
        eigenvalues,
        observations: n,
    })
}

/// Number of leading components a policy keeps; always at least 1 and at most
/// [`PcaBasis::max_k`].
///
/// Variance mode picks the smallest `k` whose cumulative explained variance reaches
/// the fraction. Component mode keeps `round(fraction * num_components)`.
pub fn select_k(basis: &PcaBasis, policy: RetentionPolicy) -> usize {
    let n = basis.num_components();
    let k = match policy.mode {
        RetentionMode::ComponentFraction => (policy.fraction * n as f64).round() as usize,
        RetentionMode::VarianceFraction => {
            let total: f64 = basis.eigenvalues.iter().sum();
            if total <= 0.0 {
                1
            } else {
                let mut cumulative = 0.0;
                let mut k = n;
                for (i, l) in basis.eigenvalues.iter().enumerate() {
                    cumulative += l;
                    if cumulative / total >= policy.fraction - 1e-12 {
                        k = i + 1;
                        break;
                    }
                }
                k
            }
        }
    };
    k.clamp(1, basis.max_k())
}

/// Centres, projects onto the first `k` components, back-projects and restores the mean.
pub fn reconstruct(frames: &Matrix, basis: &PcaBasis, k: usize) -> Result<Matrix> {
    let dim = basis.mean.len();
    if frames.cols() != dim {
        return Err(PcaError::ShapeMismatch {
            expected: dim,
            actual: frames.cols(),
        });
    }
    if k == 0 || k > dim {
        return Err(PcaError::BadK { k, max: dim });
    }
    let mut out = Matrix::zeros(frames.rows(), dim);
    let mut centered = vec![0.0; dim];
    let mut coeffs = vec![0.0; k];
    for r in 0..frames.rows() {
        for ((c, v), m) in centered.iter_mut().zip(frames.row(r)).zip(&basis.mean) {
            *c = v - m;
        }
        coeffs.fill(0.0);
        for (i, &c) in centered.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let comp_row = &basis.components.row(i)[..k];
            for (acc, v) in coeffs.iter_mut().zip(comp_row) {
                *acc += c * v;
            }
        }
        let row = out.row_mut(r);
        for (i, o) in row.iter_mut().enumerate() {
            let comp_row = &basis.components.row(i)[..k];
            *o = basis.mean[i] + coeffs.iter().zip(comp_row).map(|(a, v)| a * v).sum::<f64>();
        }
    }
    Ok(out)
}

/// Everything the component-reduction transform computed for one waveform.
#[derive(Debug, Clone)]
pub struct PcaTransform {
    pub output: Waveform,
    pub basis: PcaBasis,
    pub k: usize,
}

/// Component-reduction transform of a 16 kHz waveform; see the module docs.
/// Output length equals input length.
pub fn pca_attack(w: &Waveform, policy: RetentionPolicy) -> Result<Waveform> {
    pca_transform(w, policy).map(|t| t.output)
}

pub fn pca_transform(w: &Waveform, policy: RetentionPolicy) -> Result<PcaTransform> {
    if w.sample_rate() != FEATURE_RATE {
        return Err(PcaError::WrongRate {
            expected: FEATURE_RATE,
            actual: w.sample_rate(),
        });
    }
    let config = StftConfig::PCA;
    if config.num_frames(w.len()) < 2 || w.len() <= config.hop {
        return Err(PcaError::TooShort(w.len()));
    }
    // Pad by one hop on each side so every input sample lies under two windows.
    let pad = config.hop;
    let mut padded = vec![0.0; pad];
    padded.extend(w.samples().iter().map(|&s| s as f64));
    padded.extend(std::iter::repeat_n(0.0, pad));
    let padded = Waveform::from_f64(&padded, w.sample_rate()).expect("rate checked");
    let spec = spectral::stft(&padded, config).expect("geometry is valid");

    let mags = Matrix::new(spec.magnitudes(), spec.num_frames(), spec.num_bins()).expect("shape");
    let basis = fit_pca(&mags)?;
    let k = select_k(&basis, policy);
    let approx = reconstruct(&mags, &basis, k)?;

    let mut rebuilt = spec.clone();
    for t in 0..spec.num_frames() {
        let target = approx.row(t);
        for (c, &m) in rebuilt.frame_mut(t).iter_mut().zip(target) {
            let m = m.max(0.0);
            let norm = c.norm();
            *c = if norm > 0.0 {
                *c * (m / norm)
            } else {
                (m).into()
            };
        }
    }
    let output = resynthesize(&rebuilt, pad, w.len(), w.sample_rate());
    Ok(PcaTransform { output, basis, k })
}

fn resynthesize(spec: &Spectrogram, offset: usize, len: usize, rate: u32) -> Waveform {
    let samples = istft_samples(spec).expect("geometry is valid");
    let quantized = (0..len)
        .map(|i| quantize(samples.get(offset + i).copied().unwrap_or(0.0)))
        .collect();
    Waveform::new(quantized, rate).expect("positive rate")
}

/// Magnitude frames of a waveform under the PCA analysis geometry.
pub fn magnitude_frames(w: &Waveform) -> Option<Matrix> {
    let spec = spectral::stft(w, StftConfig::PCA).ok()?;
    Matrix::new(spec.magnitudes(), spec.num_frames(), spec.num_bins())
}
