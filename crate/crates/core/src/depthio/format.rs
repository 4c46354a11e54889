//! PDEPTH01 and PFM raster files.
//!
//! PDEPTH01 layout (all little-endian):
//!
//! ```text
//! 0..8    b"PDEPTH01"
//! 8..12   width  (u32)
//! 12..16  height (u32)
//! 16      kind code: 0 depth, 1 disparity, 2 mask (u8 per pixel)
//! 17..    row-major payload: f32 per pixel for kinds 0-1, one byte (0/1) for kind 2
//! ```
//!
//! Values are widened to `f64` on read and narrowed to `f32` on write, so a
//! write/read round-trip is bit-exact for every value representable in `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::depthio::raster::{pixel_count, DepthMap, Mask, ValueKind};
use crate::error::{PdeError, Result};

pub const PDEPTH_MAGIC: &[u8; 8] = b"PDEPTH01";
const HEADER_LEN: usize = 17;

/// Largest raster accepted on read, in pixels.
pub const MAX_PIXELS: usize = 1 << 28;

/// On-disk raster encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Pdepth,
    Pfm,
}

impl RasterFormat {
    /// Picks the format from a file extension (`.pfm` or anything else).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pfm") => RasterFormat::Pfm,
            _ => RasterFormat::Pdepth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum KindCode {
    Depth = 0,
    Disparity = 1,
    Mask = 2,
}

impl KindCode {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(KindCode::Depth),
            1 => Some(KindCode::Disparity),
            2 => Some(KindCode::Mask),
            _ => None,
        }
    }
}

/// Header of a raster file, read without decoding the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub is_mask: bool,
    pub is_disparity: bool,
}

/// Reads a PDEPTH01 or PFM file. Kind code 1 yields affine disparity, all
/// other float rasters metric depth; callers re-tag with [`DepthMap::with_kind`].
/// Non-finite pixels become invalid.
pub fn read_depth_raster(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PdeError::io(path, e))?;
    decode_depth(&bytes, path)
}

/// Writes `map` in the given format. Invalid pixels are written as their
/// stored value when it is non-finite and as `NaN` otherwise.
pub fn write_depth_raster(map: &DepthMap, path: impl AsRef<Path>, format: RasterFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        RasterFormat::Pdepth => encode_pdepth(map),
        RasterFormat::Pfm => encode_pfm(map),
    };
    write_file(path, &bytes)
}

/// Reads a mask: PDEPTH01 kind 2, or any float raster (valid nonzero pixels are set).
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PdeError::io(path, e))?;
    if bytes.starts_with(PDEPTH_MAGIC) {
        let header = parse_pdepth_header(&bytes, path)?;
        if header.is_mask {
            let payload = &bytes[HEADER_LEN..];
            let n = header.width * header.height;
            if payload.len() < n {
                return Err(PdeError::format(path, "truncated mask payload"));
            }
            let mut bits = Vec::with_capacity(n);
            for (i, &b) in payload[..n].iter().enumerate() {
                match b {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    other => {
                        return Err(PdeError::format(
                            path,
                            format!("mask byte {other} at pixel {i}, expected 0 or 1"),
                        ))
                    }
                }
            }
            return Mask::new(header.width, header.height, bits);
        }
    }
    let map = decode_depth(&bytes, path)?.with_kind(ValueKind::AffineDisparity);
    let bits = map
        .values()
        .iter()
        .zip(map.valid())
        .map(|(&v, &ok)| ok && v != 0.0)
        .collect();
    Mask::new(map.width(), map.height(), bits)
}

/// Writes a mask as PDEPTH01 kind 2.
pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = header_bytes(mask.width(), mask.height(), KindCode::Mask);
    bytes.extend(mask.bits().iter().map(|&b| u8::from(b)));
    write_file(path.as_ref(), &bytes)
}

/// Reads only the header of a PDEPTH01 or PFM file.
pub fn read_header(path: impl AsRef<Path>) -> Result<RasterHeader> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PdeError::io(path, e))?;
    if bytes.starts_with(PDEPTH_MAGIC) {
        parse_pdepth_header(&bytes, path)
    } else if bytes.starts_with(b"Pf") {
        let (width, height, _, _) = parse_pfm_header(&bytes, path)?;
        Ok(RasterHeader {
            width,
            height,
            is_mask: false,
            is_disparity: false,
        })
    } else {
        Err(PdeError::format(path, "unrecognized magic"))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| PdeError::io(path, e))?;
    file.write_all(bytes).map_err(|e| PdeError::io(path, e))
}

fn decode_depth(bytes: &[u8], path: &Path) -> Result<DepthMap> {
    if bytes.starts_with(PDEPTH_MAGIC) {
        decode_pdepth(bytes, path)
    } else if bytes.starts_with(b"Pf") {
        decode_pfm(bytes, path)
    } else if bytes.starts_with(b"PF") {
        Err(PdeError::format(path, "colour PFM is not supported"))
    } else {
        Err(PdeError::format(path, "unrecognized magic"))
    }
}

fn checked_dims(width: u64, height: u64, path: &Path) -> Result<(usize, usize)> {
    let w = usize::try_from(width).map_err(|_| PdeError::Bounds(format!("width {width}")))?;
    let h = usize::try_from(height).map_err(|_| PdeError::Bounds(format!("height {height}")))?;
    let n = pixel_count(w, h)?;
    if n > MAX_PIXELS {
        return Err(PdeError::Bounds(format!(
            "{}: {w}x{h} exceeds {MAX_PIXELS} pixels",
            path.display()
        )));
    }
    Ok((w, h))
}

fn parse_pdepth_header(bytes: &[u8], path: &Path) -> Result<RasterHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(PdeError::format(path, "truncated header"));
    }
    if &bytes[..8] != PDEPTH_MAGIC {
        return Err(PdeError::format(path, "bad magic"));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let height = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes"));
    let code = KindCode::from_byte(bytes[16])
        .ok_or_else(|| PdeError::format(path, format!("unknown kind code {}", bytes[16])))?;
    let (width, height) = checked_dims(width.into(), height.into(), path)?;
    Ok(RasterHeader {
        width,
        height,
        is_mask: code == KindCode::Mask,
        is_disparity: code == KindCode::Disparity,
    })
}

fn decode_pdepth(bytes: &[u8], path: &Path) -> Result<DepthMap> {
    let header = parse_pdepth_header(bytes, path)?;
    if header.is_mask {
        return Err(PdeError::format(path, "mask raster where depth was expected"));
    }
    let n = header.width * header.height;
    let payload = &bytes[HEADER_LEN..];
    let need = n
        .checked_mul(4)
        .ok_or_else(|| PdeError::Bounds("payload size overflows".into()))?;
    if payload.len() < need {
        return Err(PdeError::format(
            path,
            format!("payload holds {} bytes, header needs {need}", payload.len()),
        ));
    }
    let values = payload[..need]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let kind = if header.is_disparity {
        ValueKind::AffineDisparity
    } else {
        ValueKind::MetricDepth
    };
    DepthMap::new(header.width, header.height, values, kind)
}

fn header_bytes(width: usize, height: usize, code: KindCode) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + width * height * 4);
    bytes.extend_from_slice(PDEPTH_MAGIC);
    bytes.extend_from_slice(&(width as u32).to_le_bytes());
    bytes.extend_from_slice(&(height as u32).to_le_bytes());
    bytes.push(code as u8);
    bytes
}

fn stored_f32(map: &DepthMap, i: usize) -> f32 {
    let v = map.values()[i];
    if map.valid()[i] || !v.is_finite() {
        v as f32
    } else {
        f32::NAN
    }
}

fn encode_pdepth(map: &DepthMap) -> Vec<u8> {
    let code = if map.kind().is_disparity() {
        KindCode::Disparity
    } else {
        KindCode::Depth
    };
    let mut bytes = header_bytes(map.width(), map.height(), code);
    for i in 0..map.len() {
        bytes.extend_from_slice(&stored_f32(map, i).to_le_bytes());
    }
    bytes
}

// PFM stores rows bottom-to-top.
fn encode_pfm(map: &DepthMap) -> Vec<u8> {
    let mut bytes = format!("Pf\n{} {}\n-1.0\n", map.width(), map.height()).into_bytes();
    for y in (0..map.height()).rev() {
        for x in 0..map.width() {
            bytes.extend_from_slice(&stored_f32(map, y * map.width() + x).to_le_bytes());
        }
    }
    bytes
}

/// Returns `(width, height, little_endian, payload_offset)`.
fn parse_pfm_header(bytes: &[u8], path: &Path) -> Result<(usize, usize, bool, usize)> {
    let mut tokens = Vec::with_capacity(4);
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PdeError::format(path, "truncated PFM header"));
        }
        tokens
            .push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| PdeError::format(path, "non-ASCII PFM header"))?);
    }
    // exactly one whitespace byte separates the scale from the payload
    pos += 1;
    if tokens[0] != "Pf" {
        return Err(PdeError::format(path, format!("PFM magic {:?}", tokens[0])));
    }
    let parse = |s: &str, what: &str| -> Result<u64> {
        s.parse()
            .map_err(|_| PdeError::format(path, format!("bad PFM {what} {s:?}")))
    };
    let width = parse(tokens[1], "width")?;
    let height = parse(tokens[2], "height")?;
    let scale: f64 = tokens[3]
        .parse()
        .map_err(|_| PdeError::format(path, format!("bad PFM scale {:?}", tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(PdeError::format(path, "PFM scale must be nonzero"));
    }
    let (w, h) = checked_dims(width, height, path)?;
    Ok((w, h, scale < 0.0, pos))
}

fn decode_pfm(bytes: &[u8], path: &Path) -> Result<DepthMap> {
    let (width, height, little_endian, offset) = parse_pfm_header(bytes, path)?;
    let n = width * height;
    let payload = bytes.get(offset..).unwrap_or(&[]);
    if payload.len() < n * 4 {
        return Err(PdeError::format(
            path,
            format!("payload holds {} bytes, header needs {}", payload.len(), n * 4),
        ));
    }
    let mut values = vec![0.0; n];
    for (i, chunk) in payload[..n * 4].chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("4 bytes");
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (x, file_row) = (i % width, i / width);
        values[(height - 1 - file_row) * width + x] = v as f64;
    }
    DepthMap::new(width, height, values, ValueKind::MetricDepth)
}
