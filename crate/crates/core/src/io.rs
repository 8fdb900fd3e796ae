//! Readers and writers for PNG (8/16-bit), binary PGM and PFM rasters.
//!
//! Disparity PNGs follow the KITTI convention: `raw = round(d * 256)`, with a
//! raw value of 0 meaning "no disparity". Confidence PNGs store
//! `round(s * 65535)` and reserve 0 for invalid pixels.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BoolMap, ConfidenceMap, DisparityMap, GroundTruthMap, Image, INVALID_DISPARITY};

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Decoded raster before any interpretation: interleaved samples plus the
/// container's maximum representable value.
struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    max_value: f64,
    samples: Vec<f64>,
}

impl Raster {
    fn to_luma(&self) -> Vec<f64> {
        match self.channels {
            1 | 2 => self
                .samples
                .chunks(self.channels)
                .map(|px| px[0])
                .collect(),
            _ => self
                .samples
                .chunks(self.channels)
                .map(|px| LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2])
                .collect(),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn decode_png(path: &Path) -> Result<(Raster, png::BitDepth)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(file);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format("PNG", path, e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format("PNG", path, e.to_string()))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::format("PNG", path, "indexed color is not supported"))
        }
    };
    let bytes = &buf[..info.buffer_size()];
    let (samples, max_value) = match info.bit_depth {
        png::BitDepth::Eight => (bytes.iter().map(|&b| b as f64).collect(), 255.0),
        png::BitDepth::Sixteen => (
            bytes
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64)
                .collect(),
            65535.0,
        ),
        other => {
            return Err(Error::format(
                "PNG",
                path,
                format!("unsupported bit depth {other:?}, expected 8 or 16"),
            ))
        }
    };
    let raster = Raster {
        width: info.width as usize,
        height: info.height as usize,
        channels,
        max_value,
        samples,
    };
    Ok((raster, info.bit_depth))
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
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
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_num<T: std::str::FromStr>(tok: Option<&[u8]>, path: &Path, fmt: &'static str, what: &str) -> Result<T> {
    tok.and_then(|t| std::str::from_utf8(t).ok())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(fmt, path, format!("bad or missing {what}")))
}

fn decode_pgm(path: &Path) -> Result<Raster> {
    let bytes = read_bytes(path)?;
    let mut pos = 0;
    if next_token(&bytes, &mut pos) != Some(b"P5".as_slice()) {
        return Err(Error::format("PGM", path, "missing P5 magic"));
    }
    let width: usize = parse_num(next_token(&bytes, &mut pos), path, "PGM", "width")?;
    let height: usize = parse_num(next_token(&bytes, &mut pos), path, "PGM", "height")?;
    let max_value: u32 = parse_num(next_token(&bytes, &mut pos), path, "PGM", "maxval")?;
    if max_value == 0 || max_value > 65535 {
        return Err(Error::format("PGM", path, format!("maxval {max_value} out of range")));
    }
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    let bytes_per_sample = if max_value < 256 { 1 } else { 2 };
    let needed = width * height * bytes_per_sample;
    let body = bytes.get(pos..pos + needed).ok_or_else(|| {
        Error::format("PGM", path, format!("truncated: expected {needed} sample bytes"))
    })?;
    let samples: Vec<f64> = if bytes_per_sample == 1 {
        body.iter().map(|&b| b as f64).collect()
    } else {
        body.chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64)
            .collect()
    };
    if samples.iter().any(|&v| v > max_value as f64) {
        return Err(Error::format("PGM", path, "sample exceeds maxval"));
    }
    Ok(Raster {
        width,
        height,
        channels: 1,
        max_value: max_value as f64,
        samples,
    })
}

/// Reads a PFM file. Returns `(width, height, channels, samples)` with rows
/// top-to-bottom.
fn decode_pfm(path: &Path) -> Result<(usize, usize, usize, Vec<f64>)> {
    let bytes = read_bytes(path)?;
    let mut pos = 0;
    let channels = match next_token(&bytes, &mut pos) {
        Some(b"Pf") => 1,
        Some(b"PF") => 3,
        _ => return Err(Error::format("PFM", path, "missing Pf/PF magic")),
    };
    let width: usize = parse_num(next_token(&bytes, &mut pos), path, "PFM", "width")?;
    let height: usize = parse_num(next_token(&bytes, &mut pos), path, "PFM", "height")?;
    let scale: f64 = parse_num(next_token(&bytes, &mut pos), path, "PFM", "scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("PFM", path, "scale must be non-zero"));
    }
    pos += 1;
    let count = width * height * channels;
    let body = bytes
        .get(pos..pos + count * 4)
        .ok_or_else(|| Error::format("PFM", path, format!("truncated: expected {count} floats")))?;
    let little = scale < 0.0;
    let floats: Vec<f64> = body
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
        })
        .collect();
    // PFM stores the bottom row first.
    let row_len = width * channels;
    let mut samples = Vec::with_capacity(count);
    for row in floats.chunks(row_len.max(1)).rev() {
        samples.extend_from_slice(row);
    }
    Ok((width, height, channels, samples))
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Loads a grayscale or RGB raster (PNG, PGM or PFM) as a normalized
/// intensity image. RGB is collapsed to luma.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    if has_ext(path, "pfm") {
        let (w, h, c, samples) = decode_pfm(path)?;
        let raster = Raster {
            width: w,
            height: h,
            channels: c,
            max_value: 1.0,
            samples,
        };
        let luma = raster.to_luma();
        if luma.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::format("PFM", path, "intensities must lie in [0, 1]"));
        }
        return Image::new(w, h, luma);
    }
    let raster = if has_ext(path, "pgm") {
        decode_pgm(path)?
    } else {
        decode_png(path)?.0
    };
    let max = raster.max_value;
    let data = raster.to_luma().into_iter().map(|v| v / max).collect();
    Image::new(raster.width, raster.height, data)
}

fn decode_png16_gray(path: &Path) -> Result<Raster> {
    let (raster, depth) = decode_png(path)?;
    if depth != png::BitDepth::Sixteen || raster.channels != 1 {
        return Err(Error::format(
            "PNG",
            path,
            "expected a 16-bit single-channel image",
        ));
    }
    Ok(raster)
}

/// Loads a KITTI-style 16-bit disparity PNG.
pub fn load_disparity_png16(path: impl AsRef<Path>, d_max: f64) -> Result<DisparityMap> {
    let path = path.as_ref();
    let raster = decode_png16_gray(path)?;
    let data: Vec<f64> = raster
        .samples
        .iter()
        .map(|&raw| if raw == 0.0 { INVALID_DISPARITY } else { raw / 256.0 })
        .collect();
    if let Some(d) = data.iter().find(|&&d| d > d_max) {
        return Err(Error::format(
            "PNG",
            path,
            format!("disparity {d} exceeds d_max {d_max}"),
        ));
    }
    DisparityMap::new(raster.width, raster.height, d_max, data)
}

/// Loads a KITTI-style ground-truth PNG (no upper bound on disparity).
pub fn load_ground_truth_png16(path: impl AsRef<Path>) -> Result<GroundTruthMap> {
    let raster = decode_png16_gray(path.as_ref())?;
    let data = raster
        .samples
        .iter()
        .map(|&raw| if raw == 0.0 { INVALID_DISPARITY } else { raw / 256.0 })
        .collect();
    GroundTruthMap::new(raster.width, raster.height, data)
}

fn write_png16(path: &Path, width: usize, height: usize, raw: &[u16]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let to_io = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::format("PNG", path, other.to_string()),
    };
    let mut writer = encoder.write_header().map_err(to_io)?;
    let bytes: Vec<u8> = raw.iter().flat_map(|v| v.to_be_bytes()).collect();
    writer.write_image_data(&bytes).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

fn quantize(v: f64, scale: f64) -> u16 {
    (v * scale).round().clamp(0.0, 65535.0) as u16
}

/// Writes an intensity image as a 16-bit grayscale PNG.
pub fn save_image_png16(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u16> = image.data().iter().map(|&v| quantize(v, 65535.0)).collect();
    write_png16(path.as_ref(), image.width(), image.height(), &raw)
}

/// Writes a disparity map in the KITTI encoding. Valid disparities below
/// 1/512 quantize to 0 and therefore read back as missing.
pub fn save_disparity_png16(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u16> = map
        .data()
        .iter()
        .map(|&d| if d == INVALID_DISPARITY { 0 } else { quantize(d, 256.0) })
        .collect();
    write_png16(path.as_ref(), map.width(), map.height(), &raw)
}

pub fn save_ground_truth_png16(map: &GroundTruthMap, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u16> = map
        .data()
        .iter()
        .map(|&d| if d == INVALID_DISPARITY { 0 } else { quantize(d, 256.0) })
        .collect();
    write_png16(path.as_ref(), map.width(), map.height(), &raw)
}

/// Writes `round(s * 65535)` per valid pixel, 0 for invalid ones. Valid
/// scores that would round to 0 are stored as 1 so validity survives.
pub fn save_confidence_png16(map: &ConfidenceMap, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u16> = map
        .data()
        .iter()
        .zip(map.valid())
        .map(|(&s, &ok)| if ok { quantize(s, 65535.0).max(1) } else { 0 })
        .collect();
    write_png16(path.as_ref(), map.width(), map.height(), &raw)
}

pub fn load_confidence_png16(path: impl AsRef<Path>) -> Result<ConfidenceMap> {
    let raster = decode_png16_gray(path.as_ref())?;
    let valid = raster.samples.iter().map(|&raw| raw != 0.0).collect();
    let data = raster.samples.iter().map(|&raw| raw / 65535.0).collect();
    ConfidenceMap::new(raster.width, raster.height, data, valid)
}

/// Binary mask as 16-bit PNG: 65535 where set, 0 elsewhere (including
/// invalid pixels).
pub fn save_mask_png16(mask: &BoolMap, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u16> = mask
        .data()
        .iter()
        .zip(mask.valid())
        .map(|(&b, &ok)| if ok && b { 65535 } else { 0 })
        .collect();
    write_png16(path.as_ref(), mask.width(), mask.height(), &raw)
}

pub fn load_mask_png16(path: impl AsRef<Path>) -> Result<BoolMap> {
    let raster = decode_png16_gray(path.as_ref())?;
    let data = raster.samples.iter().map(|&raw| raw != 0.0).collect();
    let n = raster.samples.len();
    BoolMap::new(raster.width, raster.height, data, vec![true; n])
}

/// Writes a single-channel little-endian PFM. `NaN` is a legal value and is
/// used by callers to mark invalid pixels.
pub fn save_pfm(path: impl AsRef<Path>, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if data.len() != width * height {
        return Err(Error::Dimension(format!(
            "PFM {width}x{height} needs {} values, got {}",
            width * height,
            data.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(out, "Pf\n{width} {height}\n-1.0\n")?;
        for row in data.chunks(width).rev() {
            for &v in row {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a single-channel PFM as raw floats (rows top-to-bottom).
pub fn load_pfm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let (w, h, c, samples) = decode_pfm(path)?;
    if c != 1 {
        return Err(Error::format("PFM", path, "expected a single-channel (Pf) file"));
    }
    Ok((w, h, samples))
}
