//! Decoding array payloads into band-sequential rasters.

use thiserror::Error;

use crate::array::{expected_payload_bytes, ArrayDescriptor, Interleave, SizeOverflow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("payload too short: expected {expected} bytes from offset {offset}, found {actual}")]
    PayloadTooShort {
        offset: u64,
        expected: u64,
        actual: u64,
    },
    #[error(transparent)]
    Size(#[from] SizeOverflow),
    #[error("raster has no valid samples")]
    AllMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueDomain {
    RawInteger,
    PhysicalReal,
}

/// Samples are stored band, then line, then sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub samples: Vec<f64>,
    pub domain: ValueDomain,
    /// `true` marks a missing sample. `None` means every sample is valid.
    pub missing: Option<Vec<bool>>,
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, bands: usize, samples: Vec<f64>) -> Self {
        assert_eq!(samples.len(), width * height * bands, "sample count");
        ImageRaster {
            width,
            height,
            bands,
            samples,
            domain: ValueDomain::RawInteger,
            missing: None,
        }
    }

    pub fn is_missing(&self, i: usize) -> bool {
        self.missing.as_ref().is_some_and(|m| m[i])
    }

    pub fn index(&self, band: usize, line: usize, sample: usize) -> usize {
        (band * self.height + line) * self.width + sample
    }

    /// Valid samples: not masked and finite.
    pub fn valid_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples
            .iter()
            .enumerate()
            .filter(|(i, v)| !self.is_missing(*i) && v.is_finite())
            .map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodeReport {
    /// NaN or infinite float samples, kept as decoded.
    pub non_finite: usize,
    /// Bytes in the payload beyond the array (record padding).
    pub trailing_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub raster: ImageRaster,
    pub report: DecodeReport,
}

/// Decodes the array at `d.offset_bytes` in `payload`. Bytes past the end of
/// the array are never read.
pub fn decode(d: &ArrayDescriptor, payload: &[u8]) -> Result<Decoded, RasterError> {
    let expected = expected_payload_bytes(d)?;
    let available = (payload.len() as u64).saturating_sub(d.offset_bytes);
    if available < expected {
        return Err(RasterError::PayloadTooShort {
            offset: d.offset_bytes,
            expected,
            actual: available,
        });
    }
    let start = d.offset_bytes as usize;
    let data = &payload[start..start + expected as usize];

    let (lines, samples, bands) = (d.lines() as usize, d.samples() as usize, d.bands() as usize);
    let width = d.element.width();
    let mut out = vec![0.0f64; lines * samples * bands];
    let mut non_finite = 0;

    // Walk the source in storage order, scattering into band/line/sample.
    let plane = lines * samples;
    let mut chunks = data.chunks_exact(width);
    let mut put = |b: usize, l: usize, s: usize, out: &mut Vec<f64>| {
        let v = d.element.read(chunks.next().unwrap());
        if !v.is_finite() {
            non_finite += 1;
        }
        out[b * plane + l * samples + s] = v;
    };
    match d.interleave {
        Interleave::BandSequential => {
            for b in 0..bands {
                for l in 0..lines {
                    for s in 0..samples {
                        put(b, l, s, &mut out);
                    }
                }
            }
        }
        Interleave::LineInterleaved => {
            for l in 0..lines {
                for b in 0..bands {
                    for s in 0..samples {
                        put(b, l, s, &mut out);
                    }
                }
            }
        }
        Interleave::PixelInterleaved => {
            for l in 0..lines {
                for s in 0..samples {
                    for b in 0..bands {
                        put(b, l, s, &mut out);
                    }
                }
            }
        }
    }

    Ok(Decoded {
        raster: ImageRaster::new(samples, lines, bands, out),
        report: DecodeReport {
            non_finite,
            trailing_bytes: available - expected,
        },
    })
}

/// `raw * scaling_factor + value_offset`. Samples equal to `missing_constant`
/// (compared before scaling) join the missing mask.
pub fn apply_scaling(
    r: &ImageRaster,
    scaling_factor: f64,
    value_offset: f64,
    missing_constant: Option<f64>,
) -> ImageRaster {
    let mut mask = r.missing.clone();
    if let Some(mc) = missing_constant {
        let m = mask.get_or_insert_with(|| vec![false; r.samples.len()]);
        for (flag, &v) in m.iter_mut().zip(&r.samples) {
            if v == mc {
                *flag = true;
            }
        }
    }
    ImageRaster {
        width: r.width,
        height: r.height,
        bands: r.bands,
        samples: r
            .samples
            .iter()
            .map(|&v| v * scaling_factor + value_offset)
            .collect(),
        domain: ValueDomain::PhysicalReal,
        missing: mask,
    }
}

pub const HISTOGRAM_BINS: usize = 65536;

#[derive(Debug, Clone, PartialEq)]
pub struct RasterStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
    histogram: Vec<u32>,
}

impl RasterStats {
    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / HISTOGRAM_BINS as f64
    }

    fn bin_of(&self, v: f64) -> usize {
        if self.max == self.min {
            return 0;
        }
        let k = ((v - self.min) / (self.max - self.min) * HISTOGRAM_BINS as f64).floor();
        (k.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
    }

    /// Value of the `rank`-th smallest sample (0-based), to within half a bin.
    fn ranked(&self, rank: usize) -> f64 {
        if self.max == self.min {
            return self.min;
        }
        let mut seen = 0usize;
        for (k, &n) in self.histogram.iter().enumerate() {
            seen += n as usize;
            if seen > rank {
                let center = self.min + (k as f64 + 0.5) * self.bin_width();
                return center.clamp(self.min, self.max);
            }
        }
        self.max
    }

    /// Percentile `p` in `[0, 100]` with linear interpolation between ranks
    /// (rank `p/100 * (n-1)`), resolved through the histogram.
    pub fn percentile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 100.0);
        let rank = p / 100.0 * (self.count - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let (a, b) = (self.ranked(lo), self.ranked(hi));
        a + (b - a) * (rank - lo as f64)
    }
}

/// Exact min/max/mean over valid samples and a 65536-bin histogram
/// spanning `[min, max]`.
pub fn stats(r: &ImageRaster) -> Result<RasterStats, RasterError> {
    let mut count = 0usize;
    let mut sum = 0.0f64;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in r.valid_samples() {
        count += 1;
        sum += v;
        min = min.min(v);
        max = max.max(v);
    }
    if count == 0 {
        return Err(RasterError::AllMissing);
    }
    let mut st = RasterStats {
        min,
        max,
        mean: (sum / count as f64).clamp(min, max),
        count,
        histogram: vec![0; HISTOGRAM_BINS],
    };
    for v in r.valid_samples() {
        let k = st.bin_of(v);
        st.histogram[k] += 1;
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ElementType;

    fn raster(samples: Vec<f64>) -> ImageRaster {
        let n = samples.len();
        ImageRaster::new(n, 1, 1, samples)
    }

    #[test]
    fn decode_basics() {
        let d = ArrayDescriptor::image(1, 1, None, Interleave::BandSequential, ElementType::U8);
        assert_eq!(decode(&d, &[0]).unwrap().raster.samples, vec![0.0]);

        let d = ArrayDescriptor::image(1, 2, None, Interleave::BandSequential, ElementType::U16Be);
        let out = decode(&d, &[1, 2, 3, 4]).unwrap().raster;
        assert_eq!(out.samples, vec![258.0, 772.0]);
        assert_eq!((out.width, out.height, out.bands), (2, 1, 1));
        assert_eq!(out.domain, ValueDomain::RawInteger);
    }

    #[test]
    fn single_pixel_interleaves_agree() {
        let bip =
            ArrayDescriptor::image(1, 1, Some(3), Interleave::PixelInterleaved, ElementType::U8);
        let bsq =
            ArrayDescriptor::image(1, 1, Some(3), Interleave::BandSequential, ElementType::U8);
        let a = decode(&bip, &[10, 20, 30]).unwrap().raster;
        let b = decode(&bsq, &[10, 20, 30]).unwrap().raster;
        assert_eq!(a.samples, vec![10.0, 20.0, 30.0]);
        assert_eq!(a.bands, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn short_and_padded_payloads() {
        let mut d =
            ArrayDescriptor::image(2, 2, None, Interleave::BandSequential, ElementType::U16Le);
        d.offset_bytes = 4;
        assert_eq!(
            decode(&d, &[0; 11]),
            Err(RasterError::PayloadTooShort {
                offset: 4,
                expected: 8,
                actual: 7
            })
        );
        let ok = decode(&d, &[0; 20]).unwrap();
        assert_eq!(ok.report.trailing_bytes, 8);
        let past_end = decode(&d, &[0; 2]).unwrap_err();
        assert!(matches!(
            past_end,
            RasterError::PayloadTooShort { actual: 0, .. }
        ));
    }

    #[test]
    fn non_finite_floats_are_reported() {
        let d = ArrayDescriptor::image(1, 2, None, Interleave::BandSequential, ElementType::F32Be);
        let mut bytes = f32::NAN.to_be_bytes().to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        let out = decode(&d, &bytes).unwrap();
        assert_eq!(out.report.non_finite, 1);
        assert!(out.raster.samples[0].is_nan());
        assert_eq!(out.raster.samples[1], 1.5);
    }

    #[test]
    fn scaling() {
        let r = raster(vec![258.0, 772.0]);
        let id = apply_scaling(&r, 1.0, 0.0, None);
        assert_eq!(id.samples, r.samples);
        assert_eq!(id.domain, ValueDomain::PhysicalReal);
        assert_eq!(
            apply_scaling(&r, 0.5, 10.0, None).samples,
            vec![139.0, 396.0]
        );

        let masked = apply_scaling(&raster(vec![0.0, 255.0]), 1.0, 0.0, Some(255.0));
        assert_eq!(masked.missing, Some(vec![false, true]));
        let st = stats(&masked).unwrap();
        assert_eq!((st.min, st.max, st.mean, st.count), (0.0, 0.0, 0.0, 1));
    }

    #[test]
    fn stats_basics() {
        let st = stats(&raster(vec![7.0; 5])).unwrap();
        assert_eq!((st.min, st.max, st.mean), (7.0, 7.0, 7.0));
        assert_eq!(st.percentile(50.0), 7.0);

        let st = stats(&raster(vec![0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(st.mean, 1.5);
        assert!((st.percentile(50.0) - 1.5).abs() <= st.bin_width());
        assert!((st.percentile(0.0) - 0.0).abs() <= st.bin_width());
        assert!((st.percentile(100.0) - 3.0).abs() <= st.bin_width());

        let all_missing = apply_scaling(&raster(vec![1.0]), 1.0, 0.0, Some(1.0));
        assert_eq!(stats(&all_missing), Err(RasterError::AllMissing));
    }
}
