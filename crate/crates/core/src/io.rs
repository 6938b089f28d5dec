//! Image file formats.
//!
//! `MBF` is the lossless interchange format: an ASCII header
//! `MBF1 <width> <height> <bands>\n` followed by `width*height*bands`
//! little-endian `f32` samples, band-sequential and row-major within a band.
//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255 are supported for 8-bit
//! interchange; writing them clamps to `[0, 255]` and rounds half away from
//! zero.

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::{Grid, MultispectralImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Mbf,
    Pgm,
    Ppm,
}

impl ImageFormat {
    /// Guesses the format from a file extension, defaulting to MBF.
    pub fn from_path(path: &Path) -> ImageFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("pgm") => ImageFormat::Pgm,
            Some("ppm") => ImageFormat::Ppm,
            _ => ImageFormat::Mbf,
        }
    }
}

const MBF_MAGIC: &str = "MBF1";

pub fn read_image(path: impl AsRef<Path>) -> Result<MultispectralImage> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

pub fn write_image(img: &MultispectralImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    // Validate before touching the filesystem.
    let bytes = encode_image(img, format)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

/// Decodes an MBF, PGM or PPM byte stream, detected from its magic number.
pub fn decode_image(bytes: &[u8]) -> Result<MultispectralImage> {
    if bytes.starts_with(MBF_MAGIC.as_bytes()) {
        decode_mbf(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pnm(bytes, 1)
    } else if bytes.starts_with(b"P6") {
        decode_pnm(bytes, 3)
    } else {
        Err(Error::Format("unrecognized magic number".into()))
    }
}

pub fn encode_image(img: &MultispectralImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Mbf => encode_mbf(img),
        ImageFormat::Pgm => encode_pnm(img, 1),
        ImageFormat::Ppm => encode_pnm(img, 3),
    }
}

fn encode_mbf(img: &MultispectralImage) -> Result<Vec<u8>> {
    let header = format!("{MBF_MAGIC} {} {} {}\n", img.width(), img.height(), img.num_bands());
    let mut out = Vec::with_capacity(header.len() + 4 * img.grid().len() * img.num_bands());
    out.extend_from_slice(header.as_bytes());
    for band in img.bands() {
        for &v in band.data() {
            let narrow = v as f32;
            if !narrow.is_finite() {
                return Err(invalid(format!("sample {v} does not fit in a 32-bit float")));
            }
            out.extend_from_slice(&narrow.to_le_bytes());
        }
    }
    Ok(out)
}

/// Reads one whitespace-delimited ASCII token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
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
    if start == *pos {
        return Err(Error::Format("header ended early".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::Format("header is not ASCII".into()))
}

fn parse_dim(token: &str, what: &str) -> Result<usize> {
    match token.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::Format(format!("bad {what} {token:?}"))),
    }
}

fn truncated(needed: usize, got: usize) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::UnexpectedEof,
        format!("payload truncated: expected {needed} bytes, found {got}"),
    ))
}

fn decode_mbf(bytes: &[u8]) -> Result<MultispectralImage> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("MBF header has no terminating newline".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::Format("MBF header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 || fields[0] != MBF_MAGIC {
        return Err(Error::Format(format!("bad MBF header {header:?}")));
    }
    let width = parse_dim(fields[1], "width")?;
    let height = parse_dim(fields[2], "height")?;
    let bands = parse_dim(fields[3], "band count")?;
    let grid = Grid::new(width, height)?;

    let payload = &bytes[newline + 1..];
    let count = grid.len() * bands;
    if payload.len() < 4 * count {
        return Err(truncated(4 * count, payload.len()));
    }
    let mut samples = Vec::with_capacity(count);
    let mut reader = payload;
    let mut word = [0u8; 4];
    for _ in 0..count {
        reader.read_exact(&mut word)?;
        samples.push(f32::from_le_bytes(word) as f64);
    }
    MultispectralImage::new(grid, bands, samples)
        .map_err(|e| Error::Format(format!("invalid MBF payload: {e}")))
}

fn decode_pnm(bytes: &[u8], channels: usize) -> Result<MultispectralImage> {
    let mut pos = 2;
    let width = parse_dim(next_token(bytes, &mut pos)?, "width")?;
    let height = parse_dim(next_token(bytes, &mut pos)?, "height")?;
    let maxval = next_token(bytes, &mut pos)?;
    if maxval != "255" {
        return Err(Error::Format(format!("only maxval 255 is supported, got {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("missing whitespace after maxval".into()));
    }
    pos += 1;

    let grid = Grid::new(width, height)?;
    let count = grid.len() * channels;
    let payload = &bytes[pos..];
    if payload.len() < count {
        return Err(truncated(count, payload.len()));
    }
    let mut samples = vec![0.0; count];
    for (i, &byte) in payload[..count].iter().enumerate() {
        let pixel = i / channels;
        let channel = i % channels;
        samples[channel * grid.len() + pixel] = f64::from(byte);
    }
    MultispectralImage::new(grid, channels, samples)
}

/// Clamps to `[0, 255]` and rounds half away from zero.
pub fn to_byte(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

fn encode_pnm(img: &MultispectralImage, channels: usize) -> Result<Vec<u8>> {
    if img.num_bands() != channels {
        let kind = if channels == 1 { "PGM" } else { "PPM" };
        return Err(invalid(format!(
            "{kind} needs {channels} band(s), image has {}",
            img.num_bands()
        )));
    }
    let magic = if channels == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.grid().len() * channels);
    out.extend_from_slice(header.as_bytes());
    for pixel in 0..img.grid().len() {
        for band in img.bands() {
            out.push(to_byte(band.data()[pixel]));
        }
    }
    Ok(out)
}
