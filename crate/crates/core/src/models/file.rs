//! `SGNS` model files.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SGNS"
//!      4     2  format version (u16, currently 1)
//!      6     1  kind: 1 = LSTM, 2 = linear
//!      7     1  point subset: 0 pose-all, 1 pose-body, 2 pose-hands, 3 bbox
//!      8     1  normalization: 0 per-sequence, 1 trailing window
//!      9     1  reserved, 0
//!     10     2  trailing window length in frames (u16, 0 for per-sequence)
//!     12     4  input dimension D (u32)
//!     16     4  hidden size H (LSTM) or window W (linear) (u32)
//!     20     4  parameter count N (u32)
//!     24    4N  parameters, little-endian f32
//! ```
//!
//! All integers are little-endian. LSTM parameters follow the flat layout of
//! [`LstmClassifier`](super::LstmClassifier); linear weights are W x D
//! row-major, oldest frame first.

use std::fs;
use std::path::Path;

use super::{lstm_param_count, Classifier, Detector, LinearClassifier, LstmClassifier};
use crate::error::{Error, Result};
use crate::pose_features::{NormalizationMode, PointSubset};

pub const MODEL_MAGIC: [u8; 4] = *b"SGNS";
pub const MODEL_FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 24;

const KIND_LSTM: u8 = 1;
const KIND_LINEAR: u8 = 2;

fn corrupt(offset: usize, reason: impl Into<String>) -> Error {
    Error::CorruptModelFile {
        offset,
        reason: reason.into(),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(corrupt(self.pos, format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

impl Detector {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (kind, d, hw, params): (u8, usize, usize, &[f64]) = match &self.classifier {
            Classifier::Lstm(m) => (KIND_LSTM, m.input_dim(), m.hidden_dim(), m.params()),
            Classifier::Linear(m) => (KIND_LINEAR, m.input_dim(), m.window(), m.weights()),
        };
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("parameter {i} is not finite")));
        }
        let (norm_code, window) = match self.normalization {
            NormalizationMode::PerSequence => (0u8, 0u16),
            NormalizationMode::TrailingWindow(n) => {
                let n = u16::try_from(n)
                    .map_err(|_| Error::InvalidArgument(format!("trailing window {n} exceeds u16")))?;
                (1u8, n)
            }
        };
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u32")))
        };

        let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.len());
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.push(kind);
        out.push(self.subset.code());
        out.push(norm_code);
        out.push(0);
        out.extend_from_slice(&window.to_le_bytes());
        out.extend_from_slice(&to_u32(d, "input dimension")?.to_le_bytes());
        out.extend_from_slice(&to_u32(hw, "hidden size / window")?.to_le_bytes());
        out.extend_from_slice(&to_u32(params.len(), "parameter count")?.to_le_bytes());
        for p in params {
            out.extend_from_slice(&(*p as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4, "magic")? != MODEL_MAGIC {
            return Err(corrupt(0, "bad magic, expected \"SGNS\""));
        }
        let version = r.u16("version")?;
        if version != MODEL_FORMAT_VERSION {
            return Err(corrupt(4, format!("unsupported version {version}")));
        }
        let kind = r.u8("model kind")?;
        let subset_code = r.u8("point subset")?;
        let subset = PointSubset::from_code(subset_code)
            .ok_or_else(|| corrupt(7, format!("unknown point subset code {subset_code}")))?;
        let norm_code = r.u8("normalization")?;
        let _reserved = r.u8("reserved")?;
        let window = r.u16("trailing window")?;
        let normalization = match (norm_code, window) {
            (0, _) => NormalizationMode::PerSequence,
            (1, n) if n > 0 => NormalizationMode::TrailingWindow(n as usize),
            (1, _) => return Err(corrupt(10, "trailing window length is 0")),
            (c, _) => return Err(corrupt(8, format!("unknown normalization code {c}"))),
        };
        let d = r.u32("input dimension")? as usize;
        let hw = r.u32("hidden size / window")? as usize;
        let count = r.u32("parameter count")? as usize;

        if d != subset.dim() {
            return Err(corrupt(
                12,
                format!("input dimension {d} does not match subset {subset} ({})", subset.dim()),
            ));
        }
        let expected = match kind {
            KIND_LSTM => lstm_param_count(d, hw),
            KIND_LINEAR => d * hw,
            k => return Err(corrupt(6, format!("unknown model kind {k}"))),
        };
        if count != expected {
            return Err(corrupt(
                20,
                format!("declared {count} parameters, shape implies {expected}"),
            ));
        }
        let payload_len = buf.len() - HEADER_LEN;
        if payload_len != 4 * count {
            return Err(corrupt(
                HEADER_LEN + payload_len.min(4 * count),
                format!("payload holds {payload_len} bytes, expected {}", 4 * count),
            ));
        }
        let params: Vec<f64> = r
            .take(4 * count, "parameters")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(corrupt(HEADER_LEN + 4 * i, "non-finite parameter"));
        }
        let classifier = match kind {
            KIND_LSTM => Classifier::Lstm(LstmClassifier::from_params(d, hw, params)?),
            _ => Classifier::Linear(LinearClassifier::from_weights(hw, d, params)?),
        };
        Ok(Detector {
            classifier,
            subset,
            normalization,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
