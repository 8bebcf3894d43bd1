//! Format-neutral description of a binary image array.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementType {
    U8,
    I8,
    U16Be,
    U16Le,
    I16Be,
    I16Le,
    U32Be,
    U32Le,
    I32Be,
    I32Le,
    F32Be,
    F32Le,
    F64Be,
    F64Le,
}

/// (variant, toolkit name, PDS4 data_type)
const ELEMENT_TABLE: [(ElementType, &str, &str); 14] = [
    (ElementType::U8, "uint8", "UnsignedByte"),
    (ElementType::I8, "int8", "SignedByte"),
    (ElementType::U16Be, "uint16_be", "UnsignedMSB2"),
    (ElementType::U16Le, "uint16_le", "UnsignedLSB2"),
    (ElementType::I16Be, "int16_be", "SignedMSB2"),
    (ElementType::I16Le, "int16_le", "SignedLSB2"),
    (ElementType::U32Be, "uint32_be", "UnsignedMSB4"),
    (ElementType::U32Le, "uint32_le", "UnsignedLSB4"),
    (ElementType::I32Be, "int32_be", "SignedMSB4"),
    (ElementType::I32Le, "int32_le", "SignedLSB4"),
    (ElementType::F32Be, "float32_be", "IEEE754MSBSingle"),
    (ElementType::F32Le, "float32_le", "IEEE754LSBSingle"),
    (ElementType::F64Be, "float64_be", "IEEE754MSBDouble"),
    (ElementType::F64Le, "float64_le", "IEEE754LSBDouble"),
];

impl ElementType {
    pub const ALL: [ElementType; 14] = [
        ElementType::U8,
        ElementType::I8,
        ElementType::U16Be,
        ElementType::U16Le,
        ElementType::I16Be,
        ElementType::I16Le,
        ElementType::U32Be,
        ElementType::U32Le,
        ElementType::I32Be,
        ElementType::I32Le,
        ElementType::F32Be,
        ElementType::F32Le,
        ElementType::F64Be,
        ElementType::F64Le,
    ];

    fn row(self) -> &'static (ElementType, &'static str, &'static str) {
        ELEMENT_TABLE.iter().find(|r| r.0 == self).unwrap()
    }

    pub fn width(self) -> usize {
        use ElementType::*;
        match self {
            U8 | I8 => 1,
            U16Be | U16Le | I16Be | I16Le => 2,
            U32Be | U32Le | I32Be | I32Le | F32Be | F32Le => 4,
            F64Be | F64Le => 8,
        }
    }

    pub fn is_float(self) -> bool {
        use ElementType::*;
        matches!(self, F32Be | F32Le | F64Be | F64Le)
    }

    pub fn is_big_endian(self) -> bool {
        use ElementType::*;
        matches!(self, U16Be | I16Be | U32Be | I32Be | F32Be | F64Be)
    }

    pub fn name(self) -> &'static str {
        self.row().1
    }

    pub fn pds4_name(self) -> &'static str {
        self.row().2
    }

    pub fn from_pds4_name(name: &str) -> Option<ElementType> {
        ELEMENT_TABLE
            .iter()
            .find(|r| r.2 == name.trim())
            .map(|r| r.0)
    }

    /// Decodes one element from exactly `width()` bytes.
    pub fn read(self, b: &[u8]) -> f64 {
        use ElementType::*;
        match self {
            U8 => b[0] as f64,
            I8 => b[0] as i8 as f64,
            U16Be => u16::from_be_bytes([b[0], b[1]]) as f64,
            U16Le => u16::from_le_bytes([b[0], b[1]]) as f64,
            I16Be => i16::from_be_bytes([b[0], b[1]]) as f64,
            I16Le => i16::from_le_bytes([b[0], b[1]]) as f64,
            U32Be => u32::from_be_bytes(b[..4].try_into().unwrap()) as f64,
            U32Le => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            I32Be => i32::from_be_bytes(b[..4].try_into().unwrap()) as f64,
            I32Le => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            F32Be => f32::from_be_bytes(b[..4].try_into().unwrap()) as f64,
            F32Le => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            F64Be => f64::from_be_bytes(b[..8].try_into().unwrap()),
            F64Le => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ELEMENT_TABLE
            .iter()
            .find(|r| r.1 == s)
            .map(|r| r.0)
            .ok_or_else(|| format!("unknown element type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interleave {
    BandSequential,
    LineInterleaved,
    PixelInterleaved,
}

impl Interleave {
    pub const ALL: [Interleave; 3] = [
        Interleave::BandSequential,
        Interleave::LineInterleaved,
        Interleave::PixelInterleaved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Interleave::BandSequential => "band_sequential",
            Interleave::LineInterleaved => "line_interleaved",
            Interleave::PixelInterleaved => "pixel_interleaved",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisSpec {
    pub name: String,
    pub elements: u64,
    pub sequence_number: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("payload size overflows a signed 64-bit byte count")]
pub struct SizeOverflow;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayDescriptor {
    /// Storage order, slowest axis first.
    pub axes: Vec<AxisSpec>,
    pub element: ElementType,
    pub offset_bytes: u64,
    pub scaling_factor: f64,
    pub value_offset: f64,
    pub missing_constant: Option<f64>,
    pub interleave: Interleave,
}

fn axis(name: &str, elements: u64, seq: u32) -> AxisSpec {
    AxisSpec {
        name: name.to_string(),
        elements,
        sequence_number: seq,
    }
}

impl ArrayDescriptor {
    /// Builds a descriptor with axes laid out for the given interleave.
    /// `bands == None` gives a 2-axis array.
    pub fn image(
        lines: u64,
        samples: u64,
        bands: Option<u64>,
        interleave: Interleave,
        element: ElementType,
    ) -> Self {
        let axes = match bands {
            None => vec![axis("Line", lines, 1), axis("Sample", samples, 2)],
            Some(b) => match interleave {
                Interleave::BandSequential => vec![
                    axis("Band", b, 1),
                    axis("Line", lines, 2),
                    axis("Sample", samples, 3),
                ],
                Interleave::LineInterleaved => vec![
                    axis("Line", lines, 1),
                    axis("Band", b, 2),
                    axis("Sample", samples, 3),
                ],
                Interleave::PixelInterleaved => vec![
                    axis("Line", lines, 1),
                    axis("Sample", samples, 2),
                    axis("Band", b, 3),
                ],
            },
        };
        ArrayDescriptor {
            axes,
            element,
            offset_bytes: 0,
            scaling_factor: 1.0,
            value_offset: 0.0,
            missing_constant: None,
            interleave: if bands.is_some() {
                interleave
            } else {
                Interleave::BandSequential
            },
        }
    }

    fn band_axis(&self) -> Option<usize> {
        if self.axes.len() != 3 {
            return None;
        }
        Some(match self.interleave {
            Interleave::BandSequential => 0,
            Interleave::LineInterleaved => 1,
            Interleave::PixelInterleaved => 2,
        })
    }

    fn spatial_axes(&self) -> (u64, u64) {
        let band = self.band_axis();
        let mut spatial = self
            .axes
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != band)
            .map(|(_, a)| a.elements);
        (spatial.next().unwrap_or(1), spatial.next().unwrap_or(1))
    }

    pub fn lines(&self) -> u64 {
        self.spatial_axes().0
    }

    pub fn samples(&self) -> u64 {
        self.spatial_axes().1
    }

    pub fn bands(&self) -> u64 {
        self.band_axis().map_or(1, |i| self.axes[i].elements)
    }

    pub fn element_count(&self) -> Result<u64, SizeOverflow> {
        self.axes
            .iter()
            .try_fold(1u64, |acc, a| acc.checked_mul(a.elements))
            .ok_or(SizeOverflow)
    }
}

/// Product of the axis lengths times the element width.
pub fn expected_payload_bytes(d: &ArrayDescriptor) -> Result<u64, SizeOverflow> {
    let bytes = d
        .element_count()?
        .checked_mul(d.element.width() as u64)
        .ok_or(SizeOverflow)?;
    if bytes > i64::MAX as u64 {
        return Err(SizeOverflow);
    }
    Ok(bytes)
}
