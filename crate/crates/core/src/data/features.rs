//! `FMAT` feature-matrix files.
//!
//! Layout (little-endian): magic `FMAT`, version `u32`, kind tag `u8`,
//! frames `u32`, dim `u32`, rate `f64`, `frames·dim` row-major `f32`
//! values, then the CRC32 of every preceding byte.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{NvxError, Result};
use crate::signal::{FeatureKind, FeatureSequence};

pub const FEATURE_MAGIC: [u8; 4] = *b"FMAT";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 4 + 4 + 8;

pub fn encode_features(f: &FeatureSequence) -> Result<Vec<u8>> {
    let (frames, dim) = (f.frames(), f.dim());
    let mut out = Vec::with_capacity(HEADER_LEN + frames * dim * 4 + 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.push(f.kind().tag());
    out.extend_from_slice(&u32::try_from(frames).map_err(|_| NvxError::InvalidArgument("too many frames".into()))?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(dim).map_err(|_| NvxError::InvalidArgument("dimension too large".into()))?.to_le_bytes());
    out.extend_from_slice(&f.rate_hz().to_le_bytes());
    for &v in f.data().iter() {
        let x = v as f32;
        if !x.is_finite() {
            return Err(NvxError::NonFinite("feature value out of f32 range"));
        }
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSequence> {
    if bytes.len() < 4 {
        return Err(NvxError::Truncated(format!("{} bytes, no magic", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if found != FEATURE_MAGIC {
        return Err(NvxError::BadMagic { expected: FEATURE_MAGIC, found });
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(NvxError::Truncated(format!("{} bytes, header needs {}", bytes.len(), HEADER_LEN + 4)));
    }
    let version = u32_at(bytes, 4);
    if version != FEATURE_VERSION {
        return Err(NvxError::VersionMismatch { expected: FEATURE_VERSION, found: version });
    }
    let tag = bytes[8];
    let frames = u32_at(bytes, 9) as usize;
    let dim = u32_at(bytes, 13) as usize;
    let rate = f64::from_le_bytes(bytes[17..25].try_into().expect("8 bytes"));
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| NvxError::Malformed(format!("{frames}×{dim} overflows")))?;
    if bytes.len() < expected {
        return Err(NvxError::Truncated(format!("{} bytes, expected {expected}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(NvxError::Malformed(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let body = &bytes[..expected - 4];
    let stored = u32_at(bytes, expected - 4);
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(NvxError::Checksum { stored, computed });
    }
    let kind = FeatureKind::from_tag(tag).ok_or_else(|| NvxError::Malformed(format!("unknown kind tag {tag}")))?;
    let values: Vec<f64> = body[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let data = Array2::from_shape_vec((frames, dim), values).map_err(|e| NvxError::Malformed(e.to_string()))?;
    FeatureSequence::new(data, rate, kind).map_err(|e| NvxError::Malformed(e.to_string()))
}

pub fn write_features(path: impl AsRef<Path>, f: &FeatureSequence) -> Result<()> {
    fs::write(path, encode_features(f)?)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    decode_features(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorgrad::seeded_rng;
    use rand::Rng;

    fn random(frames: usize, dim: usize, kind: FeatureKind) -> FeatureSequence {
        let mut rng = seeded_rng(frames as u64 * 131 + dim as u64);
        let data = Array2::from_shape_simple_fn((frames, dim), || rng.random_range(-5.0..5.0));
        FeatureSequence::new(data, 100.0, kind).unwrap()
    }

    #[test]
    fn round_trip_to_f32() {
        let f = random(17, 13, FeatureKind::Mfcc);
        let g = decode_features(&encode_features(&f).unwrap()).unwrap();
        assert_eq!((g.frames(), g.dim(), g.rate_hz(), g.kind()), (17, 13, 100.0, FeatureKind::Mfcc));
        for (a, b) in f.data().iter().zip(g.data().iter()) {
            assert_eq!(*b, *a as f32 as f64);
        }
    }

    #[test]
    fn header_layout() {
        let f = random(2, 6, FeatureKind::Articulatory);
        let bytes = encode_features(&f).unwrap();
        assert_eq!(&bytes[..4], b"FMAT");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(bytes[8], 2);
        assert_eq!(&bytes[9..13], &[2, 0, 0, 0]);
        assert_eq!(&bytes[13..17], &[6, 0, 0, 0]);
        assert_eq!(&bytes[17..25], &100.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 25 + 2 * 6 * 4 + 4);
    }

    #[test]
    fn corruption_classes() {
        let good = encode_features(&random(5, 13, FeatureKind::Mfcc)).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_features(&bad), Err(NvxError::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(decode_features(&bad), Err(NvxError::VersionMismatch { expected: 1, found: 9 })));

        let mut bad = good.clone();
        let n = bad.len();
        bad[n - 1] ^= 0xff;
        assert!(matches!(decode_features(&bad), Err(NvxError::Checksum { .. })));

        let mut bad = good.clone();
        bad[30] ^= 0x10;
        assert!(matches!(decode_features(&bad), Err(NvxError::Checksum { .. })));

        assert!(matches!(decode_features(&good[..good.len() - 9]), Err(NvxError::Truncated(_))));
        assert!(matches!(decode_features(&good[..10]), Err(NvxError::Truncated(_))));
    }

    #[test]
    fn articulatory_dim_enforced_on_read() {
        let f = random(3, 7, FeatureKind::Eeg);
        let mut bytes = encode_features(&f).unwrap();
        bytes[8] = FeatureKind::Articulatory.tag();
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_features(&bytes), Err(NvxError::Malformed(_))));
    }

    #[test]
    fn values_beyond_f32_are_rejected() {
        let f = FeatureSequence::new(Array2::from_elem((1, 3), 1e300), 100.0, FeatureKind::Eeg).unwrap();
        assert!(encode_features(&f).is_err());
    }
}
