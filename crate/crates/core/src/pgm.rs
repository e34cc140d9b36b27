//! Minimal portable graymap (PGM) codec.
//!
//! Reads ASCII (`P2`) and binary (`P5`) graymaps with any maxval up to 65535
//! and keeps the raw sample values, so callers can map gray levels onto
//! physical quantities themselves. Writes binary graymaps at 8 or 16 bits.

use std::io::Write;

use crate::error::{Error, Result};

/// A decoded graymap. `pixels` is row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u16,
    data_start: usize,
}

fn skip_whitespace_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_uint(bytes: &[u8], pos: usize, field: &str) -> Result<(u64, usize)> {
    let start = skip_whitespace_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::Pgm(format!("expected {field} at byte {start}")));
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("ascii digits");
    let value = text
        .parse::<u64>()
        .map_err(|_| Error::Pgm(format!("{field} value {text} is out of range")))?;
    Ok((value, end))
}

fn read_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(Error::Pgm("missing P2/P5 magic number".into()));
    }
    let (width, pos) = read_uint(bytes, 2, "width")?;
    let (height, pos) = read_uint(bytes, pos, "height")?;
    let (maxval, pos) = read_uint(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Pgm(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Pgm(format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from binary data.
    if pos >= bytes.len() && bytes[1] == b'5' {
        return Err(Error::Pgm("truncated header".into()));
    }
    if pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Pgm(format!("unexpected byte after maxval at {pos}")));
    }
    Ok(Header {
        magic: [bytes[0], bytes[1]],
        width: width as usize,
        height: height as usize,
        maxval: maxval as u16,
        data_start: pos + 1,
    })
}

/// Decodes a `P2` or `P5` graymap.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let header = read_header(bytes)?;
    let count = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| Error::Pgm("image dimensions overflow".into()))?;
    let mut pixels = Vec::with_capacity(count);
    if header.magic[1] == b'5' {
        let wide = header.maxval > 255;
        let sample_bytes = if wide { 2 } else { 1 };
        let data = &bytes[header.data_start.min(bytes.len())..];
        if data.len() < count * sample_bytes {
            return Err(Error::Pgm(format!(
                "expected {} bytes of pixel data, found {}",
                count * sample_bytes,
                data.len()
            )));
        }
        for k in 0..count {
            let value = if wide {
                u16::from_be_bytes([data[2 * k], data[2 * k + 1]])
            } else {
                data[k] as u16
            };
            pixels.push(value);
        }
    } else {
        let mut pos = header.data_start.saturating_sub(1);
        for k in 0..count {
            let (value, next) = read_uint(bytes, pos, &format!("pixel {k}"))?;
            if value > header.maxval as u64 {
                return Err(Error::Pgm(format!(
                    "pixel {k} value {value} exceeds maxval {}",
                    header.maxval
                )));
            }
            pixels.push(value as u16);
            pos = next;
        }
    }
    if let Some((k, v)) = pixels.iter().enumerate().find(|(_, &v)| v > header.maxval) {
        return Err(Error::Pgm(format!(
            "pixel {k} value {v} exceeds maxval {}",
            header.maxval
        )));
    }
    Ok(GrayImage {
        width: header.width,
        height: header.height,
        maxval: header.maxval,
        pixels,
    })
}

/// Encodes a binary graymap. Samples use two big-endian bytes when
/// `maxval > 255`.
pub fn write_pgm<W: Write>(out: &mut W, image: &GrayImage) -> Result<()> {
    if image.pixels.len() != image.width * image.height {
        return Err(Error::DimensionMismatch {
            expected: image.width * image.height,
            actual: image.pixels.len(),
        });
    }
    write!(out, "P5\n{} {}\n{}\n", image.width, image.height, image.maxval)?;
    let mut data = Vec::with_capacity(image.pixels.len() * 2);
    for &p in &image.pixels {
        if image.maxval > 255 {
            data.extend_from_slice(&p.to_be_bytes());
        } else {
            data.push(p as u8);
        }
    }
    out.write_all(&data)?;
    Ok(())
}
