//! Binary 8-bit PGM (`P5`) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(
        data.len(),
        width * height,
        "pixel buffer does not match dimensions"
    );
    fs::write(path, encode_pgm(width, height, data)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm(format!("expected {what}")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Pgm("missing P5 magic number".into()));
    }
    let mut header = Header { bytes, pos: 2 };
    let width = header.number("width")? as usize;
    let height = header.number("height")? as usize;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Pgm(format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedDepth(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(header.pos) {
        Some(c) if c.is_ascii_whitespace() => header.pos += 1,
        _ => return Err(Error::Pgm("missing whitespace after maxval".into())),
    }
    let data = &bytes[header.pos..];
    let expected = width * height;
    if data.len() < expected {
        return Err(Error::Pgm(format!(
            "truncated raster: {} of {expected} bytes",
            data.len()
        )));
    }
    Ok(GrayImage {
        width,
        height,
        data: data[..expected].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_comments_and_binary_whitespace_values() {
        // pixel bytes that look like whitespace or '#' must not be skipped
        let mut bytes = b"P5\n# made by hand\n3 1 # trailing\n255\n".to_vec();
        bytes.extend_from_slice(&[b'\n', b'#', b' ']);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width, img.height), (3, 1));
        assert_eq!(img.data, vec![b'\n', b'#', b' ']);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(Error::Pgm(_))));
        assert!(matches!(
            decode_pgm(b"P5\n1 1\n65535\n\0\0"),
            Err(Error::UnsupportedDepth(65535))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\0"),
            Err(Error::Pgm(_))
        ));
        assert!(matches!(decode_pgm(b"P5\n1"), Err(Error::Pgm(_))));
    }

    #[test]
    fn encoding_is_canonical() {
        assert_eq!(
            encode_pgm(2, 1, &[7, 9]),
            b"P5\n2 1\n255\n\x07\x09".to_vec()
        );
    }

    proptest! {
        #[test]
        fn roundtrip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let data: Vec<u8> = (0..w * h).map(|i| (seed.rotate_left(i as u32) as u8) ^ i as u8).collect();
            let img = decode_pgm(&encode_pgm(w, h, &data)).unwrap();
            prop_assert_eq!(img, GrayImage { width: w, height: h, data });
        }
    }
}
