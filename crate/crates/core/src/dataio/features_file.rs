//! `SGNF` feature files.
//!
//! ```text
//! offset      size  field
//!      0         4  magic "SGNF"
//!      4         2  format version (u16, currently 1)
//!      6         4  frame count T (u32)
//!     10         4  dimension D (u32)
//!     14         4  fps (f32)
//!     18    4 * T*D  features, row-major f32
//!  18+4TD        T  labels, one byte per frame (0 or 1)
//! ```
//!
//! Everything is little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use super::LabeledSequence;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"SGNF";
pub const FEATURE_FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub fps: f64,
}

fn corrupt(offset: usize, reason: impl Into<String>) -> Error {
    Error::CorruptFeatureFile {
        offset,
        reason: reason.into(),
    }
}

pub fn write_features(features: ArrayView2<'_, f64>, labels: &[u8], fps: f64) -> Result<Vec<u8>> {
    let (t, d) = features.dim();
    if labels.len() != t {
        return Err(Error::LengthMismatch {
            expected: t,
            found: labels.len(),
        });
    }
    let t32 = u32::try_from(t).map_err(|_| Error::InvalidArgument("too many frames".into()))?;
    let d32 = u32::try_from(d).map_err(|_| Error::InvalidArgument("dimension too large".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t * d + t);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&t32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    out.extend_from_slice(&(fps as f32).to_le_bytes());
    for v in features.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    for &l in labels {
        if l > 1 {
            return Err(Error::InvalidArgument(format!("label {l} is not binary")));
        }
        out.push(l);
    }
    Ok(out)
}

pub fn read_features(buf: &[u8]) -> Result<FeatureFile> {
    if buf.len() < HEADER_LEN {
        return Err(corrupt(buf.len(), "truncated header"));
    }
    if buf[..4] != FEATURE_MAGIC {
        return Err(corrupt(0, "bad magic, expected \"SGNF\""));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != FEATURE_FORMAT_VERSION {
        return Err(corrupt(4, format!("unsupported version {version}")));
    }
    let t = u32::from_le_bytes(buf[6..10].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(buf[10..14].try_into().unwrap()) as usize;
    let fps = f32::from_le_bytes(buf[14..18].try_into().unwrap()) as f64;
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(corrupt(14, format!("invalid fps {fps}")));
    }
    let feat_bytes = t
        .checked_mul(d)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| corrupt(6, "shape overflows"))?;
    let expected = HEADER_LEN + feat_bytes + t;
    if buf.len() != expected {
        return Err(corrupt(
            buf.len().min(expected),
            format!("file holds {} bytes, header implies {expected}", buf.len()),
        ));
    }
    let values: Vec<f64> = buf[HEADER_LEN..HEADER_LEN + feat_bytes]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let labels = buf[HEADER_LEN + feat_bytes..].to_vec();
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(corrupt(HEADER_LEN + feat_bytes + i, "label byte is not 0 or 1"));
    }
    let features = Array2::from_shape_vec((t, d), values).expect("length checked above");
    Ok(FeatureFile {
        features,
        labels,
        fps,
    })
}

pub fn save_features(path: impl AsRef<Path>, features: ArrayView2<'_, f64>, labels: &[u8], fps: f64) -> Result<()> {
    fs::write(path, write_features(features, labels, fps)?)?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureFile> {
    read_features(&fs::read(path)?)
}

/// Loads every `*.sgnf` file of a directory, sorted by file name.
pub fn load_feature_dir(dir: impl AsRef<Path>) -> Result<Vec<LabeledSequence>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "sgnf"))
        .collect();
    paths.sort();
    paths.iter().map(LabeledSequence::load).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(t in 0usize..40, d in 1usize..10, seed in any::<u64>(), fps in 1.0f32..120.0) {
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); s };
            let vals: Vec<f64> = (0..t * d).map(|_| f32::from_bits((next() >> 40) as u32 | 0x3f00_0000) as f64).collect();
            let labels: Vec<u8> = (0..t).map(|_| (next() >> 63) as u8).collect();
            let x = Array2::from_shape_vec((t, d), vals).unwrap();
            let bytes = write_features(x.view(), &labels, fps as f64).unwrap();
            let back = read_features(&bytes).unwrap();
            prop_assert_eq!(back.features.dim(), (t, d));
            prop_assert!(back.features.iter().zip(x.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.labels, labels);
            prop_assert_eq!(back.fps, fps as f64);
        }
    }

    #[test]
    fn empty_file_is_valid() {
        let bytes = write_features(Array2::<f64>::zeros((0, 25)).view(), &[], 50.0).unwrap();
        let back = read_features(&bytes).unwrap();
        assert_eq!(back.features.dim(), (0, 25));
        assert!(back.labels.is_empty());
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let x = Array2::from_elem((5, 3), 1.5);
        let bytes = write_features(x.view(), &[0, 1, 0, 1, 1], 50.0).unwrap();
        for cut in [0, 10, 17, 18, bytes.len() - 1] {
            assert!(matches!(read_features(&bytes[..cut]), Err(Error::CorruptFeatureFile { .. })));
        }
        let mut bad = bytes.clone();
        bad[0] = b'Z';
        assert!(matches!(read_features(&bad), Err(Error::CorruptFeatureFile { offset: 0, .. })));
        let mut bad = bytes;
        let n = bad.len();
        bad[n - 1] = 7;
        assert!(read_features(&bad).is_err());
    }
}
