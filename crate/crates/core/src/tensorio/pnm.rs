//! Binary portable graymap (P5) and pixmap (P6) images.
//!
//! Samples are scaled by `1 / maxval` on the way in, so frames always hold
//! intensities in `[0, 1]`. Writing always uses `maxval = 255`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::frame::Frame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PnmFormat {
    /// P5, one channel.
    Graymap,
    /// P6, three channels.
    Pixmap,
}

impl PnmFormat {
    pub fn channels(self) -> usize {
        match self {
            PnmFormat::Graymap => 1,
            PnmFormat::Pixmap => 3,
        }
    }

    fn magic(self) -> &'static [u8; 2] {
        match self {
            PnmFormat::Graymap => b"P5",
            PnmFormat::Pixmap => b"P6",
        }
    }

    pub fn for_channels(channels: usize) -> Option<Self> {
        match channels {
            1 => Some(PnmFormat::Graymap),
            3 => Some(PnmFormat::Pixmap),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            PnmFormat::Graymap => "pgm",
            PnmFormat::Pixmap => "ppm",
        }
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| Error::parse(start, format!("{what} out of range")))
    }
}

/// Decodes a P5/P6 image from memory.
pub fn decode_pnm(bytes: &[u8]) -> Result<(Frame, PnmFormat)> {
    if bytes.len() < 2 {
        return Err(Error::parse(0, "missing magic number"));
    }
    let format = match &bytes[..2] {
        b"P5" => PnmFormat::Graymap,
        b"P6" => PnmFormat::Pixmap,
        _ => return Err(Error::parse(0, "magic number is not P5 or P6")),
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.read_uint("width")? as usize;
    let height = rd.read_uint("height")? as usize;
    let maxval_at = rd.pos;
    let maxval = rd.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(2, "zero image dimension"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::parse(maxval_at, format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(Error::parse(rd.pos, "expected whitespace after maxval")),
    }

    let channels = format.channels();
    let samples = width * height * channels;
    let bytes_per_sample = if maxval == 255 { 1 } else { 2 };
    let payload = &bytes[rd.pos..];
    if payload.len() < samples * bytes_per_sample {
        return Err(Error::parse(
            rd.pos + payload.len(),
            format!(
                "truncated raster: expected {} bytes, found {}",
                samples * bytes_per_sample,
                payload.len()
            ),
        ));
    }

    let scale = 1.0 / f64::from(maxval);
    let mut data = vec![0.0; samples];
    let plane = width * height;
    for p in 0..plane {
        for c in 0..channels {
            let i = p * channels + c;
            let raw = if bytes_per_sample == 1 {
                u32::from(payload[i])
            } else {
                u32::from(u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]))
            };
            if raw > maxval {
                return Err(Error::parse(rd.pos + i * bytes_per_sample, "sample exceeds maxval"));
            }
            data[c * plane + p] = f64::from(raw) * scale;
        }
    }
    Ok((Frame::from_parts_unchecked(height, width, channels, data), format))
}

/// Encodes a frame as an 8-bit P5/P6 image.
pub fn encode_pnm(frame: &Frame, format: PnmFormat) -> Result<Vec<u8>> {
    if frame.channels() != format.channels() {
        return Err(Error::ChannelMismatch {
            expected: format.channels(),
            actual: frame.channels(),
        });
    }
    let (h, w, channels) = frame.shape();
    let magic = format.magic();
    let header = format!("{}\n{w} {h}\n255\n", std::str::from_utf8(magic).unwrap_or("P5"));
    let mut out = Vec::with_capacity(header.len() + h * w * channels);
    out.extend_from_slice(header.as_bytes());
    let plane = h * w;
    let data = frame.data();
    for p in 0..plane {
        for c in 0..channels {
            let v = (data[c * plane + p] * 255.0).round().clamp(0.0, 255.0);
            out.push(v as u8);
        }
    }
    Ok(out)
}

/// Reads a binary portable map, checking that it matches `format`.
pub fn read_frame(path: impl AsRef<Path>, format: PnmFormat) -> Result<Frame> {
    let bytes = fs::read(path)?;
    let (frame, found) = decode_pnm(&bytes)?;
    if found != format {
        return Err(Error::parse(0, format!("expected {format:?}, file is {found:?}")));
    }
    Ok(frame)
}

/// Reads either P5 or P6, whichever the file declares.
pub fn read_frame_any(path: impl AsRef<Path>) -> Result<Frame> {
    let bytes = fs::read(path)?;
    Ok(decode_pnm(&bytes)?.0)
}

pub fn write_frame(frame: &Frame, path: impl AsRef<Path>, format: PnmFormat) -> Result<()> {
    let bytes = encode_pnm(frame, format)?;
    fs::write(path, bytes)?;
    Ok(())
}
