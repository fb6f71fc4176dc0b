//! Netpbm bitmap (PBM) reading and writing, plain (P1) and raw (P4).
//!
//! PBM `1` is black, which is ink here. P4 rows are packed MSB-first and
//! padded to a byte boundary.

use std::fs;
use std::path::Path;

use crate::error::{Error, PbmErrorKind, Result};
use crate::image::BinaryImage;

/// Largest pixel count accepted from a file header.
const MAX_PIXELS: usize = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbmFormat {
    /// Plain text `P1`.
    Plain,
    /// Packed binary `P4`.
    Raw,
}

fn err(kind: PbmErrorKind, offset: usize, detail: impl Into<String>) -> Error {
    Error::Pbm {
        kind,
        offset,
        detail: detail.into(),
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn read_dimension(&mut self) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        if start >= self.data.len() {
            return Err(err(PbmErrorKind::Truncated, start, "missing dimension"));
        }
        let mut value: usize = 0;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((self.data[self.pos] - b'0') as usize))
                .ok_or_else(|| err(PbmErrorKind::DimensionOverflow, start, "dimension overflow"))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(err(
                PbmErrorKind::MalformedHeader,
                start,
                format!("expected a decimal dimension, found byte {:#04x}", self.data[start]),
            ));
        }
        Ok(value)
    }
}

/// Parses a PBM file held in memory. The format is taken from the magic number.
pub fn decode_pbm(data: &[u8]) -> Result<(BinaryImage, PbmFormat)> {
    if data.len() < 2 {
        return Err(err(PbmErrorKind::Truncated, data.len(), "missing magic number"));
    }
    let format = match &data[..2] {
        b"P1" => PbmFormat::Plain,
        b"P4" => PbmFormat::Raw,
        _ => return Err(err(PbmErrorKind::MalformedHeader, 0, "expected P1 or P4")),
    };
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.read_dimension()?;
    let height = cur.read_dimension()?;
    if width == 0 || height == 0 {
        return Err(err(PbmErrorKind::MalformedHeader, cur.pos, "zero dimension"));
    }
    let npix = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| err(PbmErrorKind::DimensionOverflow, cur.pos, "image too large"))?;

    let mut pixels = Vec::with_capacity(npix);
    match format {
        PbmFormat::Plain => {
            while pixels.len() < npix {
                cur.skip_whitespace_and_comments();
                match data.get(cur.pos) {
                    None => {
                        return Err(err(
                            PbmErrorKind::Truncated,
                            cur.pos,
                            format!("expected {npix} pixels, found {}", pixels.len()),
                        ))
                    }
                    Some(b'0') => pixels.push(0),
                    Some(b'1') => pixels.push(1),
                    Some(&b) => {
                        return Err(err(
                            PbmErrorKind::BadPixel,
                            cur.pos,
                            format!("unexpected byte {b:#04x}"),
                        ))
                    }
                }
                cur.pos += 1;
            }
        }
        PbmFormat::Raw => {
            // exactly one whitespace byte separates the header from the raster
            match data.get(cur.pos) {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                Some(_) => {
                    return Err(err(
                        PbmErrorKind::MalformedHeader,
                        cur.pos,
                        "missing whitespace after header",
                    ))
                }
                None => return Err(err(PbmErrorKind::Truncated, cur.pos, "missing raster")),
            }
            let stride = width.div_ceil(8);
            let need = stride * height;
            let payload = &data[cur.pos..];
            if payload.len() < need {
                return Err(err(
                    PbmErrorKind::Truncated,
                    data.len(),
                    format!("expected {need} raster bytes, found {}", payload.len()),
                ));
            }
            for row in payload[..need].chunks_exact(stride) {
                for c in 0..width {
                    pixels.push((row[c / 8] >> (7 - (c % 8))) & 1);
                }
            }
        }
    }
    Ok((BinaryImage::from_pixels(width, height, pixels)?, format))
}

pub fn encode_pbm(img: &BinaryImage, format: PbmFormat) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    match format {
        PbmFormat::Raw => {
            let stride = w.div_ceil(8);
            let mut out = format!("P4\n{w} {h}\n").into_bytes();
            out.reserve(stride * h);
            for r in 0..h {
                let mut row = vec![0u8; stride];
                for c in 0..w {
                    if img.at(r, c) != 0 {
                        row[c / 8] |= 0x80 >> (c % 8);
                    }
                }
                out.extend_from_slice(&row);
            }
            out
        }
        PbmFormat::Plain => {
            let mut out = format!("P1\n{w} {h}\n").into_bytes();
            for r in 0..h {
                // netpbm keeps plain lines at most 70 characters
                for (i, c) in (0..w).enumerate() {
                    if i > 0 && i % 70 == 0 {
                        out.push(b'\n');
                    }
                    out.push(b'0' + img.at(r, c));
                }
                out.push(b'\n');
            }
            out
        }
    }
}

/// Reads a PBM file, checking that it is in the expected format.
pub fn load_image(path: impl AsRef<Path>, format: PbmFormat) -> Result<BinaryImage> {
    let data = fs::read(path)?;
    let (img, found) = decode_pbm(&data)?;
    if found != format {
        return Err(err(
            PbmErrorKind::MalformedHeader,
            0,
            format!("expected {format:?}, found {found:?}"),
        ));
    }
    Ok(img)
}

/// Reads either PBM flavour.
pub fn load_any(path: impl AsRef<Path>) -> Result<BinaryImage> {
    let data = fs::read(path)?;
    Ok(decode_pbm(&data)?.0)
}

pub fn save_image(img: &BinaryImage, path: impl AsRef<Path>, format: PbmFormat) -> Result<()> {
    fs::write(path, encode_pbm(img, format))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_plain_file() {
        let (img, fmt) = decode_pbm(b"P1\n1 1\n1\n").unwrap();
        assert_eq!(fmt, PbmFormat::Plain);
        assert_eq!((img.width(), img.height()), (1, 1));
        assert_eq!(img.at(0, 0), 1);
    }

    #[test]
    fn plain_digits_without_separators_and_comments() {
        let (img, _) = decode_pbm(b"P1\n# a comment\n3 2\n101\n010").unwrap();
        assert_eq!(img, BinaryImage::from_ascii(&["#.#", ".#."]).unwrap());
    }

    #[test]
    fn raw_zero_row() {
        let (img, fmt) = decode_pbm(b"P4\n8 1\n\x00").unwrap();
        assert_eq!(fmt, PbmFormat::Raw);
        assert_eq!(img.count_ones(), 0);
        assert_eq!(img.width(), 8);
    }

    #[test]
    fn background_16x16_payload() {
        let img = BinaryImage::new(16, 16).unwrap();
        let bytes = encode_pbm(&img, PbmFormat::Raw);
        let header = b"P4\n16 16\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8; 32][..]);
    }

    #[test]
    fn foreground_8x8_payload() {
        let img = BinaryImage::new(8, 8).unwrap().complement();
        let bytes = encode_pbm(&img, PbmFormat::Raw);
        assert_eq!(&bytes[bytes.len() - 8..], &[0xFFu8; 8][..]);
        assert_eq!(bytes.len(), b"P4\n8 8\n".len() + 8);
    }

    #[test]
    fn errors_carry_offsets() {
        match decode_pbm(b"P4\n8 2\n\x00") {
            Err(Error::Pbm { kind, offset, .. }) => {
                assert_eq!(kind, PbmErrorKind::Truncated);
                assert_eq!(offset, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
        match decode_pbm(b"P1\n2 x\n") {
            Err(Error::Pbm { kind, offset, .. }) => {
                assert_eq!(kind, PbmErrorKind::MalformedHeader);
                assert_eq!(offset, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode_pbm(b"P4\n99999999999999999999999 1\n"),
            Err(Error::Pbm {
                kind: PbmErrorKind::DimensionOverflow,
                ..
            })
        ));
        assert!(matches!(
            decode_pbm(b"P4\n100000 100000\n"),
            Err(Error::Pbm {
                kind: PbmErrorKind::DimensionOverflow,
                ..
            })
        ));
        assert!(matches!(
            decode_pbm(b"P5\n1 1\n"),
            Err(Error::Pbm {
                kind: PbmErrorKind::MalformedHeader,
                offset: 0,
                ..
            })
        ));
        assert!(matches!(
            decode_pbm(b"P1\n2 1\n1"),
            Err(Error::Pbm {
                kind: PbmErrorKind::Truncated,
                ..
            })
        ));
    }

    #[test]
    fn file_round_trip_and_format_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pbm");
        let img = BinaryImage::from_ascii(&["#..#.", "..#.."]).unwrap();
        save_image(&img, &path, PbmFormat::Plain).unwrap();
        assert_eq!(load_image(&path, PbmFormat::Plain).unwrap(), img);
        assert!(load_image(&path, PbmFormat::Raw).is_err());
    }

    proptest! {
        #[test]
        fn raw_round_trip_is_byte_identical(
            w in 1usize..40, h in 1usize..12, seed in any::<u64>()
        ) {
            let mut state = seed | 1;
            let pixels: Vec<u8> = (0..w * h).map(|_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state & 1) as u8
            }).collect();
            let img = BinaryImage::from_pixels(w, h, pixels).unwrap();
            let bytes = encode_pbm(&img, PbmFormat::Raw);
            let (back, _) = decode_pbm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(encode_pbm(&back, PbmFormat::Raw), bytes);
            let plain = encode_pbm(&img, PbmFormat::Plain);
            prop_assert_eq!(decode_pbm(&plain).unwrap().0, img);
        }
    }

    #[test]
    fn non_byte_aligned_33x7() {
        let pixels: Vec<u8> = (0..33 * 7).map(|i| ((i * 7 + i / 5) % 3 == 0) as u8).collect();
        let img = BinaryImage::from_pixels(33, 7, pixels).unwrap();
        let bytes = encode_pbm(&img, PbmFormat::Raw);
        assert_eq!(bytes.len(), b"P4\n33 7\n".len() + 5 * 7);
        assert_eq!(decode_pbm(&bytes).unwrap().0, img);
    }
}
