use std::path::Path;

use crate::error::{Error, Result};
use crate::image::DepthMap;

/// Ground truth may mark missing pixels with 0; predictions must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthRole {
    Prediction,
    GroundTruth,
}

/// ASCII header `DEPTH v1 <width> <height>\n`, then row-major little-endian
/// `f32` values. Values are narrowed to `f32`.
pub fn encode_depth(depth: &DepthMap) -> Vec<u8> {
    let header = format!("DEPTH v1 {} {}\n", depth.width(), depth.height());
    let mut out = Vec::with_capacity(header.len() + 4 * depth.len());
    out.extend_from_slice(header.as_bytes());
    for v in depth.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth(bytes: &[u8], role: DepthRole) -> Result<DepthMap> {
    let end = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| Error::HeaderMismatch("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::HeaderMismatch("header is not ASCII".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "DEPTH" || tokens[1] != "v1" {
        return Err(Error::HeaderMismatch(format!("expected \"DEPTH v1 <width> <height>\", got {header:?}")));
    }
    let dim = |t: &str| t.parse::<usize>().map_err(|_| Error::HeaderMismatch(format!("bad dimension {t:?}")));
    let (w, h) = (dim(tokens[2])?, dim(tokens[3])?);
    let payload = &bytes[end + 1..];
    let expected =
        w.checked_mul(h).and_then(|n| n.checked_mul(4)).ok_or_else(|| Error::HeaderMismatch("dimensions overflow".into()))?;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::HeaderMismatch(format!("{} trailing bytes after payload", payload.len() - expected)));
    }
    let values: Vec<f64> = payload.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect();
    for (index, v) in values.iter().enumerate() {
        let ok = match role {
            DepthRole::Prediction => *v > 0.0 && v.is_finite(),
            DepthRole::GroundTruth => *v >= 0.0 && v.is_finite(),
        };
        if !ok {
            return Err(Error::NonPositiveValue { index, value: *v });
        }
    }
    DepthMap::new(w, h, values)
}

pub fn read_depth_file(path: impl AsRef<Path>, role: DepthRole) -> Result<DepthMap> {
    decode_depth(&std::fs::read(path)?, role)
}

pub fn write_depth_file(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    Ok(std::fs::write(path, encode_depth(depth))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pixel_encoding() {
        let bytes = encode_depth(&DepthMap::filled(1, 1, 2.5).unwrap());
        assert_eq!(&bytes[..13], b"DEPTH v1 1 1\n");
        assert_eq!(&bytes[13..], &[0x00, 0x00, 0x20, 0x40]);
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = encode_depth(&DepthMap::filled(3, 2, 1.0).unwrap());
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(decode_depth(&bytes, DepthRole::GroundTruth), Err(Error::TruncatedPayload { expected: 24, found: 20 })));
    }

    #[test]
    fn roles() {
        let bytes = encode_depth(&DepthMap::new(2, 1, vec![0.0, 3.0]).unwrap());
        assert!(decode_depth(&bytes, DepthRole::GroundTruth).is_ok());
        assert!(matches!(decode_depth(&bytes, DepthRole::Prediction), Err(Error::NonPositiveValue { index: 0, .. })));
        let mut neg = b"DEPTH v1 1 1\n".to_vec();
        neg.extend_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(decode_depth(&neg, DepthRole::GroundTruth), Err(Error::NonPositiveValue { .. })));
    }
}
