//! Versioned little-endian binary checkpoints.
//!
//! Layout: magic `ADVAUDIO`, `u32` version, `u32`-prefixed UTF-8 alphabet, `u32`
//! feature dim / hidden dim / classes, `u32` sample rate / hop / FFT size, then a
//! `u32` tensor count followed by tensors, each a `u32`-prefixed name, `u32` rows,
//! `u32` cols and `rows * cols` row-major `f64` values.

use std::path::Path;

use thiserror::Error;

use super::{AcousticModel, Params};
use crate::ctc::Alphabet;
use crate::spectral::{FEATURE_FFT, FEATURE_HOP, FEATURE_RATE};

pub const MAGIC: &[u8; 8] = b"ADVAUDIO";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    IoFailure(#[from] std::io::Error),
    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptShape(String),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len());
        self.0.extend_from_slice(b);
    }

    fn tensor(&mut self, name: &str, rows: usize, cols: usize, data: &[f64]) {
        debug_assert_eq!(rows * cols, data.len());
        self.bytes(name.as_bytes());
        self.u32(rows);
        self.u32(cols);
        for v in data {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                CheckpointError::CorruptShape(format!(
                    "truncated at byte {} (wanted {n} more)",
                    self.pos
                ))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| CheckpointError::CorruptShape("invalid UTF-8".into()))
    }

    fn tensor(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
    ) -> Result<Vec<f64>, CheckpointError> {
        let found = self.string()?;
        let (r, c) = (self.u32()?, self.u32()?);
        if found != name || r != rows || c != cols {
            return Err(CheckpointError::CorruptShape(format!(
                "expected tensor {name} {rows}x{cols}, found {found} {r}x{c}"
            )));
        }
        let raw = self.take(rows * cols * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn encode_checkpoint(m: &AcousticModel) -> Vec<u8> {
    let (d, h, c) = (m.feature_dim, m.hidden, m.classes());
    let mut w = Writer(MAGIC.to_vec());
    w.u32(VERSION as usize);
    w.bytes(m.alphabet.as_string().as_bytes());
    for v in [d, h, c, FEATURE_RATE as usize, FEATURE_HOP, FEATURE_FFT] {
        w.u32(v);
    }
    w.u32(7);
    w.tensor("feature_mean", 1, d, &m.feature_mean);
    w.tensor("feature_scale", 1, d, &m.feature_scale);
    w.tensor("w_in", d, h, &m.params.w_in);
    w.tensor("w_rec", h, h, &m.params.w_rec);
    w.tensor("b_h", 1, h, &m.params.b_h);
    w.tensor("w_out", h, c, &m.params.w_out);
    w.tensor("b_out", 1, c, &m.params.b_out);
    w.0
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<AcousticModel, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(CheckpointError::CorruptShape(
            "not a checkpoint (bad magic)".into(),
        ));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let labels: Vec<char> = r.string()?.chars().collect();
    let alphabet = Alphabet::new(&labels).map_err(CheckpointError::CorruptShape)?;
    let (d, h, c) = (r.u32()?, r.u32()?, r.u32()?);
    let geometry = (r.u32()?, r.u32()?, r.u32()?);
    if c != alphabet.num_classes() {
        return Err(CheckpointError::CorruptShape(format!(
            "{c} classes for a {}-label alphabet",
            alphabet.num_labels()
        )));
    }
    if geometry != (FEATURE_RATE as usize, FEATURE_HOP, FEATURE_FFT) {
        return Err(CheckpointError::CorruptShape(format!(
            "unsupported feature geometry {geometry:?}"
        )));
    }
    if r.u32()? != 7 {
        return Err(CheckpointError::CorruptShape(
            "unexpected tensor count".into(),
        ));
    }
    let feature_mean = r.tensor("feature_mean", 1, d)?;
    let feature_scale = r.tensor("feature_scale", 1, d)?;
    let params = Params {
        w_in: r.tensor("w_in", d, h)?,
        w_rec: r.tensor("w_rec", h, h)?,
        b_h: r.tensor("b_h", 1, h)?,
        w_out: r.tensor("w_out", h, c)?,
        b_out: r.tensor("b_out", 1, c)?,
    };
    if r.pos != bytes.len() {
        return Err(CheckpointError::CorruptShape("trailing bytes".into()));
    }
    Ok(AcousticModel {
        alphabet,
        feature_dim: d,
        hidden: h,
        feature_mean,
        feature_scale,
        params,
    })
}

pub fn save_checkpoint(m: &AcousticModel, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    std::fs::write(path, encode_checkpoint(m))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AcousticModel, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}
