use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Binary PGM (`P5`, one channel) or PPM (`P6`, three channels), maxval 255.
/// Intensities are quantized with `round(255 v)`.
pub fn encode_pnm(image: &ImageBuffer) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos).unwrap_or_default();
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        _ => return Err(Error::UnsupportedMagic(magic)),
    };
    let mut number = |what: &str| -> Result<u32> {
        let t = token(&mut pos).ok_or_else(|| Error::HeaderMismatch(format!("missing {what}")))?;
        t.parse::<u32>().map_err(|_| Error::HeaderMismatch(format!("{what} {t:?} is not a number")))
    };
    let width = number("width")? as usize;
    let height = number("height")? as usize;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(Error::MaxvalUnsupported(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::TruncatedPayload { expected: width * height * channels, found: 0 });
    }
    Ok(Header { channels, width, height, data_start: pos + 1 })
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    let h = parse_header(bytes)?;
    let expected = h.width * h.height * h.channels;
    let raster = &bytes[h.data_start..];
    if raster.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: raster.len() });
    }
    let data = raster[..expected].iter().map(|b| f64::from(*b) / 255.0).collect();
    ImageBuffer::new(h.width, h.height, h.channels, data)
}

pub fn read_image_file(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    decode_pnm(&std::fs::read(path)?)
}

pub fn write_image_file(path: impl AsRef<Path>, image: &ImageBuffer) -> Result<()> {
    Ok(std::fs::write(path, encode_pnm(image))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_intensities() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 85, 170, 255]);
        let img = decode_pnm(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(encode_pnm(&img), bytes);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5 # gray\n# size next\n1 1\n255\n".to_vec();
        bytes.push(51);
        assert_eq!(decode_pnm(&bytes).unwrap().data(), &[0.2]);
    }

    #[test]
    fn rejects_other_formats() {
        assert!(matches!(decode_pnm(b"P4\n1 1\n1\n\x00"), Err(Error::UnsupportedMagic(m)) if m == "P4"));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\x00\x00"), Err(Error::MaxvalUnsupported(65535))));
        assert!(matches!(decode_pnm(b"P6\n2 1\n255\n\x00\x00\x00"), Err(Error::TruncatedPayload { expected: 6, found: 3 })));
    }
}
