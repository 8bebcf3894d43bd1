//! Opening a label file and locating the payload it describes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::array::ArrayDescriptor;
use crate::odl::{self, OdlError, OdlValue};
use crate::pds4::{self, descriptor_to_json, LabelError};
use crate::raster::{self, Decoded, RasterError};

#[derive(Debug, Error)]
pub enum ProductError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}: cannot tell whether this is a PDS3 ODL or a PDS4 XML label")]
    Ambiguous(PathBuf),
    #[error("{0}: label describes no image array")]
    NoImageArray(PathBuf),
    #[error("{path}: payload file {target} not found")]
    MissingPayload { path: PathBuf, target: String },
    #[error("{path}: {source}")]
    Label {
        path: PathBuf,
        #[source]
        source: LabelError,
    },
    #[error("{path}: {source}")]
    Raster {
        path: PathBuf,
        #[source]
        source: RasterError,
    },
}

impl ProductError {
    /// True for errors caused by the file system rather than file contents.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            ProductError::Io { .. } | ProductError::MissingPayload { .. }
        )
    }

    /// Short reason used in skip reports, e.g. `PayloadTooShort: ...`.
    pub fn reason(&self) -> String {
        let kind = match self {
            ProductError::Io { .. } => "IoError",
            ProductError::Ambiguous(_) => "AmbiguousFormat",
            ProductError::NoImageArray(_) => "NoImageArray",
            ProductError::MissingPayload { .. } => "MissingPayload",
            ProductError::Label { source, .. } => match source {
                LabelError::XmlMalformed(_) => "XmlMalformed",
                LabelError::MissingFileArea => "MissingFileArea",
                LabelError::UnsupportedElementType(_) => "UnsupportedElementType",
                LabelError::BadAxisNumbering(_) => "BadAxisNumbering",
                LabelError::InvalidField { .. } => "InvalidField",
                LabelError::UnsupportedSampleType { .. } => "UnsupportedSampleType",
                LabelError::Odl(e) => match e {
                    OdlError::UnbalancedBlock { .. } => "UnbalancedBlock",
                    OdlError::MissingEnd => "MissingEnd",
                    OdlError::MalformedValue { .. } => "MalformedValue",
                    OdlError::NotFound(_) => "NotFound",
                    OdlError::NeedsRecordBytes(_) => "NeedsRecordBytes",
                    OdlError::BadPointer { .. } => "BadPointer",
                },
            },
            ProductError::Raster { source, .. } => match source {
                RasterError::PayloadTooShort { .. } => "PayloadTooShort",
                RasterError::Size(_) => "Overflow",
                RasterError::AllMissing => "AllMissing",
            },
        };
        let detail = match self {
            ProductError::Label { source, .. } => source.to_string(),
            ProductError::Raster { source, .. } => source.to_string(),
            ProductError::Io { source, .. } => source.to_string(),
            other => other.to_string(),
        };
        format!("{kind}: {detail}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFormat {
    Pds3,
    Pds4,
}

impl LabelFormat {
    pub fn name(self) -> &'static str {
        match self {
            LabelFormat::Pds3 => "pds3",
            LabelFormat::Pds4 => "pds4",
        }
    }
}

pub fn is_label_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("xml") || e.eq_ignore_ascii_case("lbl"))
}

/// Extension first (`.xml`, `.lbl`), then a sniff of the leading bytes.
pub fn detect_format(path: &Path, head: &[u8]) -> Result<LabelFormat, ProductError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("xml") => return Ok(LabelFormat::Pds4),
        Some(e) if e.eq_ignore_ascii_case("lbl") => return Ok(LabelFormat::Pds3),
        _ => {}
    }
    let start = head
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .map_or(&head[..0], |i| &head[i..]);
    let starts = |p: &[u8]| start.len() >= p.len() && start[..p.len()].eq_ignore_ascii_case(p);
    if starts(b"<?xml") || starts(b"<") {
        Ok(LabelFormat::Pds4)
    } else if starts(b"PDS_VERSION_ID") || starts(b"ODL_VERSION_ID") || starts(b"/*") {
        Ok(LabelFormat::Pds3)
    } else {
        Err(ProductError::Ambiguous(path.to_path_buf()))
    }
}

/// A parsed label bound to its payload file.
#[derive(Debug, Clone)]
pub struct Product {
    pub format: LabelFormat,
    pub product_id: String,
    pub label_path: PathBuf,
    pub data_path: PathBuf,
    pub descriptor: ArrayDescriptor,
    pub camera: Option<String>,
    pub acquisition_time: Option<String>,
}

/// Finds `name` next to the label, falling back to a case-insensitive match
/// since archives mix upper- and lower-case file names.
fn resolve_sibling(label_path: &Path, name: &str) -> Option<PathBuf> {
    let dir = label_path.parent().unwrap_or(Path::new("."));
    let direct = dir.join(name);
    if direct.is_file() {
        return Some(direct);
    }
    let rel = Path::new(name);
    let (sub, file) = (rel.parent().unwrap_or(Path::new("")), rel.file_name()?);
    let mut matches: Vec<PathBuf> = fs::read_dir(dir.join(sub))
        .ok()?
        .filter_map(|e| e.ok())
        .filter(|e| {
            e.file_name()
                .to_str()
                .zip(file.to_str())
                .is_some_and(|(a, b)| a.eq_ignore_ascii_case(b))
        })
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    matches.sort();
    matches.into_iter().next()
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Parsed label with the JSON rendering used by `inspect`.
pub struct LabelDump {
    pub format: LabelFormat,
    pub json: Value,
    pub text: String,
}

pub fn read_label(path: &Path) -> Result<(LabelFormat, Vec<u8>), ProductError> {
    let bytes = fs::read(path).map_err(|source| ProductError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format = detect_format(path, &bytes[..bytes.len().min(256)])?;
    Ok((format, bytes))
}

pub fn inspect_label(path: &Path) -> Result<LabelDump, ProductError> {
    let (format, bytes) = read_label(path)?;
    let label_err = |source: LabelError| ProductError::Label {
        path: path.to_path_buf(),
        source,
    };
    match format {
        LabelFormat::Pds4 => {
            let text = String::from_utf8_lossy(&bytes);
            let product = pds4::parse_pds4(&text).map_err(label_err)?;
            let mut lines = vec![
                format!("format: PDS4 ({})", product.product_class),
                format!("lid: {}", product.logical_identifier),
                format!("file: {}", product.file_name),
            ];
            if let Some(t) = &product.title {
                lines.push(format!("title: {t}"));
            }
            if let Some(t) = &product.start_time {
                lines.push(format!("start_time: {t}"));
            }
            if let Some(i) = &product.instrument {
                lines.push(format!("instrument: {i}"));
            }
            for (i, d) in product.arrays.iter().enumerate() {
                lines.push(format!(
                    "array[{i}]: {} x {} x {} {} {} at byte {}",
                    d.lines(),
                    d.samples(),
                    d.bands(),
                    d.element,
                    d.interleave.name(),
                    d.offset_bytes
                ));
            }
            Ok(LabelDump {
                format,
                json: product.to_json(),
                text: lines.join("\n") + "\n",
            })
        }
        LabelFormat::Pds3 => {
            let label = odl::parse_odl_bytes(&bytes).map_err(|e| label_err(e.into()))?;
            let mut json = serde_json::json!({ "v": 1, "format": "pds3" });
            json["label"] = odl::label_to_json(&label);
            if let Ok((d, _)) = pds4::descriptor_from_odl(&label, None) {
                json["arrays"] = Value::Array(vec![descriptor_to_json(&d)]);
            }
            Ok(LabelDump {
                format,
                json,
                text: odl::serialize_odl(&label),
            })
        }
    }
}

/// Parses the label and resolves its payload file; nothing is decoded yet.
pub fn open_label(path: &Path) -> Result<Product, ProductError> {
    let (format, bytes) = read_label(path)?;
    let label_err = |source: LabelError| ProductError::Label {
        path: path.to_path_buf(),
        source,
    };
    let missing = |target: &str| ProductError::MissingPayload {
        path: path.to_path_buf(),
        target: target.to_string(),
    };
    match format {
        LabelFormat::Pds4 => {
            let product = pds4::parse_pds4(&String::from_utf8_lossy(&bytes)).map_err(label_err)?;
            let descriptor = product
                .primary_array()
                .cloned()
                .ok_or_else(|| ProductError::NoImageArray(path.to_path_buf()))?;
            let data_path = resolve_sibling(path, &product.file_name)
                .ok_or_else(|| missing(&product.file_name))?;
            let product_id = if product.logical_identifier.is_empty() {
                file_stem(path)
            } else {
                product.logical_identifier.clone()
            };
            Ok(Product {
                format,
                product_id,
                label_path: path.to_path_buf(),
                data_path,
                descriptor,
                camera: product.instrument,
                acquisition_time: product.start_time,
            })
        }
        LabelFormat::Pds3 => {
            let label = odl::parse_odl_bytes(&bytes).map_err(|e| label_err(e.into()))?;
            let (descriptor, pointer) =
                pds4::descriptor_from_odl(&label, None).map_err(label_err)?;
            let data_path = match &pointer.target_file {
                None => path.to_path_buf(),
                Some(f) => resolve_sibling(path, f).ok_or_else(|| missing(f))?,
            };
            let text = |k: &str| label.get(k).and_then(OdlValue::as_str).map(str::to_string);
            Ok(Product {
                format,
                product_id: text("PRODUCT_ID").unwrap_or_else(|| file_stem(path)),
                label_path: path.to_path_buf(),
                data_path,
                descriptor,
                camera: text("INSTRUMENT_ID").or_else(|| text("INSTRUMENT_NAME")),
                acquisition_time: text("START_TIME"),
            })
        }
    }
}

impl Product {
    pub fn payload_len(&self) -> Result<u64, ProductError> {
        fs::metadata(&self.data_path)
            .map(|m| m.len())
            .map_err(|source| ProductError::Io {
                path: self.data_path.clone(),
                source,
            })
    }

    pub fn decode(&self) -> Result<Decoded, ProductError> {
        let payload = fs::read(&self.data_path).map_err(|source| ProductError::Io {
            path: self.data_path.clone(),
            source,
        })?;
        raster::decode(&self.descriptor, &payload).map_err(|source| ProductError::Raster {
            path: self.data_path.clone(),
            source,
        })
    }

    /// Decodes and applies the descriptor's scaling and missing constant.
    pub fn decode_scaled(&self) -> Result<raster::ImageRaster, ProductError> {
        let decoded = self.decode()?;
        let d = &self.descriptor;
        Ok(raster::apply_scaling(
            &decoded.raster,
            d.scaling_factor,
            d.value_offset,
            d.missing_constant,
        ))
    }
}
