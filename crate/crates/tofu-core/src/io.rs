//! Byte-level codecs. Filesystem access stays with the caller.
//!
//! PFM follows the portable-float-map convention: scanlines run bottom to
//! top, channels interleave per pixel, a negative scale marks little-endian
//! payloads. PGM8 is a lossy 8-bit export. TOFC is the native correlation
//! container: a fixed 24-byte little-endian header followed by the planar
//! f32 payload.

use crate::error::CoreError;
use crate::raster::{BitDepth, CorrelationFrame, Raster, RasterKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Pfm,
    Pgm8,
    Tofc,
}

/// Result of sniffing and decoding a byte buffer.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub raster: Raster,
    /// Present only for TOFC buffers that carry a frequency.
    pub mod_freq_hz: Option<f32>,
}

const TOFC_MAGIC: &[u8; 4] = b"TOFC";
const TOFC_VERSION: u32 = 1;
const TOFC_HEADER_LEN: usize = 24;

pub fn encode_raster(raster: &Raster, format: Format) -> Result<Vec<u8>, CoreError> {
    match format {
        Format::Pfm => encode_pfm(raster),
        Format::Pgm8 => encode_pgm8(raster),
        Format::Tofc => Ok(encode_tofc(raster, 0.0)),
    }
}

/// Decodes any supported container, dispatching on the leading magic.
pub fn decode_raster(bytes: &[u8]) -> Result<Decoded, CoreError> {
    if bytes.len() >= 4 && &bytes[..4] == TOFC_MAGIC {
        return decode_tofc(bytes);
    }
    match bytes.get(..2) {
        Some(b"Pf") | Some(b"PF") => decode_pfm(bytes),
        Some(b"P5") => decode_pgm8(bytes),
        _ => Err(CoreError::codec("container", "unrecognized magic")),
    }
}

pub fn encode_frame(frame: &CorrelationFrame) -> Vec<u8> {
    encode_tofc(&frame.raster, frame.mod_freq_hz)
}

pub fn decode_frame(bytes: &[u8]) -> Result<CorrelationFrame, CoreError> {
    let decoded = decode_tofc(bytes)?;
    let freq = decoded
        .mod_freq_hz
        .ok_or_else(|| CoreError::codec("TOFC", "frame has no modulation frequency"))?;
    CorrelationFrame::new(decoded.raster, freq)
}

fn ensure_finite(data: &[f32]) -> Result<(), CoreError> {
    for (index, v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(CoreError::NonFinite { index });
        }
    }
    Ok(())
}

// --- PFM ---

fn encode_pfm(raster: &Raster) -> Result<Vec<u8>, CoreError> {
    let magic = match raster.channels() {
        1 => "Pf",
        3 => "PF",
        n => {
            return Err(CoreError::codec(
                "PFM",
                format!("supports 1 or 3 channels, got {n}"),
            ))
        }
    };
    ensure_finite(raster.data())?;
    let (w, h, c) = (raster.width(), raster.height(), raster.channels());
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(raster.data().len() * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            for ch in 0..c {
                out.extend_from_slice(&raster.get(x, y, ch).to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Reads one whitespace-delimited ASCII token starting at `*pos`.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, CoreError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(CoreError::codec("header", "unexpected end of header"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| CoreError::codec("header", "non-ascii header"))
}

fn parse_dim(token: &str) -> Result<u32, CoreError> {
    let v: u32 = token
        .parse()
        .map_err(|_| CoreError::codec("header", format!("bad dimension {token:?}")))?;
    if v == 0 {
        return Err(CoreError::codec("header", "zero dimension"));
    }
    Ok(v)
}

fn decode_pfm(bytes: &[u8]) -> Result<Decoded, CoreError> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    let channels: u32 = match magic {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(CoreError::codec("PFM", format!("bad magic {other:?}"))),
    };
    let w = parse_dim(next_token(bytes, &mut pos)?)?;
    let h = parse_dim(next_token(bytes, &mut pos)?)?;
    let scale: f32 = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| CoreError::codec("PFM", "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(CoreError::codec("PFM", "scale must be nonzero"));
    }
    let little_endian = scale < 0.0;
    // exactly one whitespace byte separates the scale from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(CoreError::codec("PFM", "missing payload separator"));
    }
    pos += 1;
    let n = w as usize * h as usize * channels as usize;
    let payload = &bytes[pos..];
    if payload.len() != n * 4 {
        return Err(CoreError::codec(
            "PFM",
            format!("payload is {} bytes, expected {}", payload.len(), n * 4),
        ));
    }
    let mut data = vec![0.0f32; n];
    let plane_len = w as usize * h as usize;
    let mut chunk = payload.chunks_exact(4);
    for file_row in 0..h {
        let y = h - 1 - file_row; // scanlines are stored bottom-up
        for x in 0..w {
            for c in 0..channels {
                let raw = chunk.next().expect("length checked");
                let b = [raw[0], raw[1], raw[2], raw[3]];
                let v = if little_endian {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                };
                if !v.is_finite() {
                    return Err(CoreError::NonFinite {
                        index: (c as usize * plane_len) + (y as usize * w as usize) + x as usize,
                    });
                }
                data[(c as usize * plane_len) + (y as usize * w as usize) + x as usize] = v;
            }
        }
    }
    let kind = if channels == 3 {
        RasterKind::Rgb
    } else {
        RasterKind::Generic
    };
    Ok(Decoded {
        raster: Raster::new(kind, w, h, channels, data)?,
        mod_freq_hz: None,
    })
}

// --- PGM8 ---

/// Lossy 8-bit export. One channel writes as-is; four-channel correlation
/// rasters stack their planes vertically. The value range is normalised to
/// 0..255, so this is for inspection, not round-tripping.
fn encode_pgm8(raster: &Raster) -> Result<Vec<u8>, CoreError> {
    let ok = raster.channels() == 1
        || (raster.channels() == 4 && raster.kind() == RasterKind::Correlation);
    if !ok {
        return Err(CoreError::codec(
            "PGM8",
            "supports single-channel rasters or correlation frames only",
        ));
    }
    ensure_finite(raster.data())?;
    let lo = raster.data().iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = raster
        .data()
        .iter()
        .cloned()
        .fold(f32::NEG_INFINITY, f32::max);
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let stacked_h = raster.height() as usize * raster.channels() as usize;
    let mut out = format!("P5\n{} {} \n255\n", raster.width(), stacked_h).into_bytes();
    for v in raster.data() {
        out.push(((v - lo) * scale).round().clamp(0.0, 255.0) as u8);
    }
    Ok(out)
}

fn decode_pgm8(bytes: &[u8]) -> Result<Decoded, CoreError> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != "P5" {
        return Err(CoreError::codec("PGM8", format!("bad magic {magic:?}")));
    }
    let w = parse_dim(next_token(bytes, &mut pos)?)?;
    let h = parse_dim(next_token(bytes, &mut pos)?)?;
    let maxval: u32 = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| CoreError::codec("PGM8", "bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(CoreError::codec("PGM8", format!("maxval {maxval}")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(CoreError::codec("PGM8", "missing payload separator"));
    }
    pos += 1;
    let n = w as usize * h as usize;
    let payload = &bytes[pos..];
    if payload.len() != n {
        return Err(CoreError::codec(
            "PGM8",
            format!("payload is {} bytes, expected {n}", payload.len()),
        ));
    }
    let data = payload.iter().map(|&b| b as f32).collect();
    Ok(Decoded {
        raster: Raster::new(RasterKind::Generic, w, h, 1, data)?,
        mod_freq_hz: None,
    })
}

// --- TOFC ---

fn encode_tofc(raster: &Raster, mod_freq_hz: f32) -> Vec<u8> {
    let mut out = Vec::with_capacity(TOFC_HEADER_LEN + raster.data().len() * 4);
    out.extend_from_slice(TOFC_MAGIC);
    out.extend_from_slice(&TOFC_VERSION.to_le_bytes());
    out.extend_from_slice(&raster.width().to_le_bytes());
    out.extend_from_slice(&raster.height().to_le_bytes());
    out.extend_from_slice(&raster.channels().to_le_bytes());
    out.extend_from_slice(&mod_freq_hz.to_le_bytes());
    for v in raster.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_tofc(bytes: &[u8]) -> Result<Decoded, CoreError> {
    if bytes.len() < TOFC_HEADER_LEN {
        return Err(CoreError::codec("TOFC", "truncated header"));
    }
    if &bytes[..4] != TOFC_MAGIC {
        return Err(CoreError::codec("TOFC", "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != TOFC_VERSION {
        return Err(CoreError::codec(
            "TOFC",
            format!("unsupported version {version}"),
        ));
    }
    let (w, h, c) = (u32_at(8), u32_at(12), u32_at(16));
    let freq = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let n = w as usize * h as usize * c as usize;
    let payload = &bytes[TOFC_HEADER_LEN..];
    if payload.len() != n * 4 {
        return Err(CoreError::codec(
            "TOFC",
            format!("payload is {} bytes, expected {}", payload.len(), n * 4),
        ));
    }
    let mut data = Vec::with_capacity(n);
    for raw in payload.chunks_exact(4) {
        data.push(f32::from_le_bytes(raw.try_into().unwrap()));
    }
    ensure_finite(&data)?;
    let kind = match c {
        4 => RasterKind::Correlation,
        3 => RasterKind::Rgb,
        _ => RasterKind::Generic,
    };
    let raster = Raster::new(kind, w, h, c, data)?;
    Ok(Decoded {
        raster,
        mod_freq_hz: if freq > 0.0 { Some(freq) } else { None },
    })
}

/// Re-encodes a decoded correlation buffer preserving its bit-depth flag.
/// TOFC itself stores dequantized floats either way.
pub fn frame_with_bit_depth(mut frame: CorrelationFrame, bit_depth: BitDepth) -> CorrelationFrame {
    frame.bit_depth = bit_depth;
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_rejects_two_channels() {
        let r = Raster::zeros(RasterKind::Generic, 2, 2, 2);
        assert!(encode_raster(&r, Format::Pfm).is_err());
    }

    #[test]
    fn pfm_rejects_nan() {
        let mut r = Raster::zeros(RasterKind::Generic, 2, 2, 1);
        r.set(0, 0, 0, f32::NAN);
        assert!(matches!(
            encode_raster(&r, Format::Pfm),
            Err(CoreError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn tofc_rejects_truncated_payload() {
        let r = Raster::zeros(RasterKind::Correlation, 2, 2, 4);
        let mut bytes = encode_frame(&CorrelationFrame::new(r, 2.0e7).unwrap());
        bytes.pop();
        assert!(decode_raster(&bytes).is_err());
    }

    #[test]
    fn tofc_rejects_trailing_bytes() {
        let r = Raster::zeros(RasterKind::Correlation, 2, 2, 4);
        let mut bytes = encode_frame(&CorrelationFrame::new(r, 2.0e7).unwrap());
        bytes.push(0);
        assert!(decode_raster(&bytes).is_err());
    }

    #[test]
    fn tofc_rejects_wrong_version() {
        let r = Raster::zeros(RasterKind::Correlation, 1, 1, 4);
        let mut bytes = encode_frame(&CorrelationFrame::new(r, 2.0e7).unwrap());
        bytes[4] = 9;
        assert!(decode_raster(&bytes).is_err());
    }

    #[test]
    fn pgm8_normalises_range() {
        let r = Raster::new(RasterKind::DepthM, 2, 1, 1, vec![1.0, 3.0]).unwrap();
        let bytes = encode_raster(&r, Format::Pgm8).unwrap();
        let decoded = decode_raster(&bytes).unwrap().raster;
        assert_eq!(decoded.data(), &[0.0, 255.0]);
    }

    #[test]
    fn unknown_magic_is_rejected() {
        assert!(decode_raster(b"WHAT1234").is_err());
    }
}
