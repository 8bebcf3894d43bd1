//! Linear stretch to 8/16-bit and a small deterministic PNG writer.
//!
//! Output is grayscale (1 band) or truecolor (3 bands), never interlaced,
//! no alpha. The only ancillary chunk is an optional `tEXt` keyed `Source`.
//! Compression is zlib level 6 and each row's filter is chosen by the
//! minimum sum of absolute differences, so identical rasters always give
//! identical bytes.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::raster::{stats, ImageRaster, RasterError, ValueDomain};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("value {value} at index {index} is outside 0..={max} (stretch 'none')")]
    RangeError { index: usize, value: f64, max: u32 },
    #[error("PNG export supports 1 or 3 bands, raster has {0}")]
    UnsupportedBands(usize),
    #[error("raster is not quantized to {0}-bit integers")]
    NotQuantized(u8),
    #[error("image dimensions {0}x{1} do not fit a PNG header")]
    TooLarge(usize, usize),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StretchMethod {
    None,
    MinMax,
    Percentile { lo: f64, hi: f64 },
}

impl Default for StretchMethod {
    fn default() -> Self {
        StretchMethod::Percentile { lo: 0.5, hi: 99.5 }
    }
}

impl fmt::Display for StretchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StretchMethod::None => f.write_str("none"),
            StretchMethod::MinMax => f.write_str("minmax"),
            StretchMethod::Percentile { lo, hi } => write!(f, "p{lo},{hi}"),
        }
    }
}

impl FromStr for StretchMethod {
    type Err = String;

    /// `none`, `minmax`, or `pLO,HI` (e.g. `p0.5,99.5`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => return Ok(StretchMethod::None),
            "minmax" => return Ok(StretchMethod::MinMax),
            _ => {}
        }
        let bad = || format!("invalid stretch {s:?}; expected minmax, none or pLO,HI");
        let (lo, hi) = s
            .strip_prefix('p')
            .and_then(|rest| rest.split_once(','))
            .ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
            return Err(format!(
                "percentiles must satisfy 0 <= lo < hi <= 100, got {lo},{hi}"
            ));
        }
        Ok(StretchMethod::Percentile { lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchSpec {
    pub method: StretchMethod,
    pub depth: BitDepth,
}

impl Default for StretchSpec {
    fn default() -> Self {
        StretchSpec {
            method: StretchMethod::default(),
            depth: BitDepth::Eight,
        }
    }
}

/// Input values mapped to 0 and to full scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Linear map of `[lo, hi]` onto `[0, 2^depth - 1]`, clamped and rounded half
/// away from zero. Missing samples become 0, as does everything when
/// `hi == lo`.
pub fn stretch(
    r: &ImageRaster,
    spec: &StretchSpec,
) -> Result<(ImageRaster, StretchBounds), ExportError> {
    let max = spec.depth.max_value() as f64;
    let st = stats(r)?;
    let (lo, hi) = match spec.method {
        StretchMethod::None => (0.0, max),
        StretchMethod::MinMax => (st.min, st.max),
        StretchMethod::Percentile { lo, hi } => (st.percentile(lo), st.percentile(hi)),
    };
    let mut out = Vec::with_capacity(r.samples.len());
    for (i, &v) in r.samples.iter().enumerate() {
        if r.is_missing(i) || !v.is_finite() {
            out.push(0.0);
            continue;
        }
        let q = match spec.method {
            StretchMethod::None => {
                if !(0.0..=max).contains(&v) {
                    return Err(ExportError::RangeError {
                        index: i,
                        value: v,
                        max: spec.depth.max_value(),
                    });
                }
                v.round()
            }
            _ if hi <= lo => 0.0,
            _ => ((v - lo) * max / (hi - lo)).round().clamp(0.0, max),
        };
        out.push(q);
    }
    let raster = ImageRaster {
        width: r.width,
        height: r.height,
        bands: r.bands,
        samples: out,
        domain: ValueDomain::RawInteger,
        missing: None,
    };
    Ok((raster, StretchBounds { lo, hi }))
}

fn chunk(out: &mut impl Write, kind: &[u8; 4], data: &[u8]) -> io::Result<u64> {
    let mut crc = crc32fast::Hasher::new();
    crc.update(kind);
    crc.update(data);
    out.write_all(&(data.len() as u32).to_be_bytes())?;
    out.write_all(kind)?;
    out.write_all(data)?;
    out.write_all(&crc.finalize().to_be_bytes())?;
    Ok(12 + data.len() as u64)
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = a as i16 + b as i16 - c as i16;
    let (pa, pb, pc) = (
        (p - a as i16).abs(),
        (p - b as i16).abs(),
        (p - c as i16).abs(),
    );
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

fn filter_row(kind: u8, row: &[u8], prev: &[u8], bpp: usize, out: &mut Vec<u8>) {
    out.clear();
    out.push(kind);
    for i in 0..row.len() {
        let a = if i >= bpp { row[i - bpp] } else { 0 };
        let b = prev[i];
        let c = if i >= bpp { prev[i - bpp] } else { 0 };
        let x = row[i];
        out.push(match kind {
            0 => x,
            1 => x.wrapping_sub(a),
            2 => x.wrapping_sub(b),
            3 => x.wrapping_sub(((a as u16 + b as u16) / 2) as u8),
            _ => x.wrapping_sub(paeth(a, b, c)),
        });
    }
}

fn filter_cost(filtered: &[u8]) -> u64 {
    filtered[1..]
        .iter()
        .map(|&v| (v as i8).unsigned_abs() as u64)
        .sum()
}

/// Pixel bytes in PNG order: interleaved bands, 16-bit big-endian.
fn scanlines(r: &ImageRaster, depth: BitDepth) -> Result<Vec<Vec<u8>>, ExportError> {
    let max = depth.max_value() as f64;
    let mut rows = Vec::with_capacity(r.height);
    for line in 0..r.height {
        let mut row = Vec::with_capacity(r.width * r.bands * depth.bits() as usize / 8);
        for sample in 0..r.width {
            for band in 0..r.bands {
                let v = r.samples[r.index(band, line, sample)];
                if !(0.0..=max).contains(&v) || v.fract() != 0.0 {
                    return Err(ExportError::NotQuantized(depth.bits()));
                }
                match depth {
                    BitDepth::Eight => row.push(v as u8),
                    BitDepth::Sixteen => row.extend_from_slice(&(v as u16).to_be_bytes()),
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes a quantized raster as PNG and returns the number of bytes written.
pub fn write_png<W: Write>(
    r: &ImageRaster,
    depth: BitDepth,
    source: Option<&str>,
    mut out: W,
) -> Result<u64, ExportError> {
    let color_type = match r.bands {
        1 => 0u8,
        3 => 2u8,
        n => return Err(ExportError::UnsupportedBands(n)),
    };
    let (w, h) = match (u32::try_from(r.width), u32::try_from(r.height)) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 && w <= i32::MAX as u32 && h <= i32::MAX as u32 => (w, h),
        _ => return Err(ExportError::TooLarge(r.width, r.height)),
    };
    let rows = scanlines(r, depth)?;
    let bpp = r.bands * depth.bits() as usize / 8;

    let mut zlib = ZlibEncoder::new(Vec::new(), Compression::new(6));
    let zero_row = vec![0u8; rows.first().map_or(0, Vec::len)];
    let mut best = Vec::new();
    let mut candidate = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let prev = if i == 0 { &zero_row } else { &rows[i - 1] };
        let mut best_cost = u64::MAX;
        for kind in 0..5u8 {
            filter_row(kind, row, prev, bpp, &mut candidate);
            let cost = filter_cost(&candidate);
            if cost < best_cost {
                best_cost = cost;
                std::mem::swap(&mut best, &mut candidate);
            }
        }
        zlib.write_all(&best)?;
    }
    let idat = zlib.finish()?;

    let mut written = 8u64;
    out.write_all(b"\x89PNG\r\n\x1a\n")?;
    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&w.to_be_bytes());
    ihdr.extend_from_slice(&h.to_be_bytes());
    ihdr.extend_from_slice(&[depth.bits(), color_type, 0, 0, 0]);
    written += chunk(&mut out, b"IHDR", &ihdr)?;
    if let Some(text) = source {
        let mut data = b"Source\0".to_vec();
        // tEXt is Latin-1; anything else is replaced.
        data.extend(text.chars().map(|c| {
            if (c as u32) < 256 && c != '\0' {
                c as u8
            } else {
                b'?'
            }
        }));
        written += chunk(&mut out, b"tEXt", &data)?;
    }
    written += chunk(&mut out, b"IDAT", &idat)?;
    written += chunk(&mut out, b"IEND", &[])?;
    out.flush()?;
    Ok(written)
}

pub fn write_png_file(
    r: &ImageRaster,
    depth: BitDepth,
    source: Option<&str>,
    path: &Path,
) -> Result<u64, ExportError> {
    // Encode fully first so a bad raster never leaves a partial file behind.
    let mut bytes = Vec::new();
    let n = write_png(r, depth, source, &mut bytes)?;
    let mut file = BufWriter::new(File::create(path)?);
    file.write_all(&bytes)?;
    file.flush()?;
    Ok(n)
}
