//! PDS4 XML labels, plus the PDS3 `IMAGE` object mapped onto the same
//! [`ArrayDescriptor`].
//!
//! Only the subset needed to find and describe image arrays is read. Element
//! names are matched on their local name, so any namespace prefix works.

use quick_xml::events::Event;
use quick_xml::Reader;
use serde_json::{json, Value};
use thiserror::Error;

use crate::array::{expected_payload_bytes, ArrayDescriptor, AxisSpec, ElementType, Interleave};
use crate::odl::{self, OdlBlock, OdlError, OdlLabel, OdlValue, PointerInfo};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("malformed XML: {0}")]
    XmlMalformed(String),
    #[error("label has no File_Area_Observational with a file_name")]
    MissingFileArea,
    #[error("unsupported PDS4 data_type {0:?}")]
    UnsupportedElementType(String),
    #[error("bad axis numbering: {0}")]
    BadAxisNumbering(String),
    #[error("invalid {field}: {detail}")]
    InvalidField { field: String, detail: String },
    #[error("unsupported sample type: SAMPLE_BITS = {bits}, SAMPLE_TYPE = {sample_type}")]
    UnsupportedSampleType { bits: i64, sample_type: String },
    #[error(transparent)]
    Odl(#[from] OdlError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pds4Product {
    pub product_class: String,
    pub logical_identifier: String,
    pub title: Option<String>,
    pub start_time: Option<String>,
    /// First `Observing_System_Component` of type Instrument.
    pub instrument: Option<String>,
    pub file_name: String,
    pub arrays: Vec<ArrayDescriptor>,
}

impl Pds4Product {
    /// The first array in document order.
    pub fn primary_array(&self) -> Option<&ArrayDescriptor> {
        self.arrays.first()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "v": 1,
            "format": "pds4",
            "product_class": self.product_class,
            "lid": self.logical_identifier,
            "title": self.title,
            "start_time": self.start_time,
            "instrument": self.instrument,
            "file": self.file_name,
            "arrays": self.arrays.iter().map(descriptor_to_json).collect::<Vec<_>>(),
        })
    }
}

pub fn descriptor_to_json(d: &ArrayDescriptor) -> Value {
    json!({
        "axes": d.axes.iter().map(|a| json!({
            "name": a.name,
            "elements": a.elements,
            "sequence_number": a.sequence_number,
        })).collect::<Vec<_>>(),
        "element_type": d.element.name(),
        "data_type": d.element.pds4_name(),
        "offset_bytes": d.offset_bytes,
        "scaling_factor": d.scaling_factor,
        "value_offset": d.value_offset,
        "missing_constant": d.missing_constant,
        "interleave": d.interleave.name(),
        "lines": d.lines(),
        "samples": d.samples(),
        "bands": d.bands(),
        "payload_bytes": expected_payload_bytes(d).ok(),
    })
}

#[derive(Default)]
struct AxisBuilder {
    name: Option<String>,
    elements: Option<u64>,
    sequence_number: Option<u32>,
}

struct ArrayBuilder {
    kind: String,
    declared_axes: Option<usize>,
    offset: Option<u64>,
    data_type: Option<String>,
    scaling_factor: Option<f64>,
    value_offset: Option<f64>,
    missing_constant: Option<f64>,
    axes: Vec<AxisBuilder>,
}

fn parse_number<T: std::str::FromStr>(field: &str, text: &str) -> Result<T, LabelError> {
    text.trim().parse().map_err(|_| LabelError::InvalidField {
        field: field.to_string(),
        detail: format!("{:?} is not a number", text.trim()),
    })
}

/// Real values, also accepting `16#FFFF#` style based integers that show
/// up in special constants.
fn parse_constant(field: &str, text: &str) -> Result<f64, LabelError> {
    let t = text.trim();
    if t.contains('#') {
        let label =
            odl::parse_odl(&format!("X = {t}\nEND")).map_err(|_| LabelError::InvalidField {
                field: field.to_string(),
                detail: format!("{t:?} is not a number"),
            })?;
        if let Some(v) = label.get("X").and_then(OdlValue::as_f64) {
            return Ok(v);
        }
    }
    parse_number(field, t)
}

impl ArrayBuilder {
    fn new(kind: &str) -> Self {
        ArrayBuilder {
            kind: kind.to_string(),
            declared_axes: None,
            offset: None,
            data_type: None,
            scaling_factor: None,
            value_offset: None,
            missing_constant: None,
            axes: Vec::new(),
        }
    }

    fn finish(self) -> Result<ArrayDescriptor, LabelError> {
        let expected_axes = if self.kind.starts_with("Array_2D") {
            2
        } else {
            3
        };
        if self.axes.len() != expected_axes {
            return Err(LabelError::BadAxisNumbering(format!(
                "{} has {} Axis_Array entries",
                self.kind,
                self.axes.len()
            )));
        }
        if let Some(n) = self.declared_axes {
            if n != expected_axes {
                return Err(LabelError::BadAxisNumbering(format!(
                    "{} declares axes = {n}",
                    self.kind
                )));
            }
        }
        let mut axes = Vec::with_capacity(self.axes.len());
        for a in self.axes {
            let sequence_number = a.sequence_number.ok_or_else(|| {
                LabelError::BadAxisNumbering("Axis_Array without sequence_number".into())
            })?;
            let elements = a.elements.ok_or_else(|| LabelError::InvalidField {
                field: "elements".into(),
                detail: "missing".into(),
            })?;
            if elements == 0 {
                return Err(LabelError::InvalidField {
                    field: "elements".into(),
                    detail: "axis length must be at least 1".into(),
                });
            }
            axes.push(AxisSpec {
                name: a.name.unwrap_or_default(),
                elements,
                sequence_number,
            });
        }
        axes.sort_by_key(|a| a.sequence_number);
        for (i, a) in axes.iter().enumerate() {
            if a.sequence_number as usize != i + 1 {
                return Err(LabelError::BadAxisNumbering(format!(
                    "sequence numbers must be 1..={}, found {:?}",
                    axes.len(),
                    axes.iter().map(|a| a.sequence_number).collect::<Vec<_>>()
                )));
            }
        }
        let interleave = if axes.len() == 3 {
            let band = axes
                .iter()
                .position(|a| a.name.eq_ignore_ascii_case("band"))
                .or_else(|| {
                    let others: Vec<usize> = axes
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| {
                            !a.name.eq_ignore_ascii_case("line")
                                && !a.name.eq_ignore_ascii_case("sample")
                        })
                        .map(|(i, _)| i)
                        .collect();
                    (others.len() == 1).then(|| others[0])
                })
                .ok_or_else(|| {
                    LabelError::BadAxisNumbering("cannot tell which axis holds bands".into())
                })?;
            [
                Interleave::BandSequential,
                Interleave::LineInterleaved,
                Interleave::PixelInterleaved,
            ][band]
        } else {
            Interleave::BandSequential
        };
        let data_type = self.data_type.ok_or_else(|| LabelError::InvalidField {
            field: "data_type".into(),
            detail: "missing Element_Array/data_type".into(),
        })?;
        let element = ElementType::from_pds4_name(&data_type)
            .ok_or_else(|| LabelError::UnsupportedElementType(data_type.trim().to_string()))?;
        Ok(ArrayDescriptor {
            axes,
            element,
            offset_bytes: self.offset.unwrap_or(0),
            scaling_factor: self.scaling_factor.unwrap_or(1.0),
            value_offset: self.value_offset.unwrap_or(0.0),
            missing_constant: self.missing_constant,
            interleave,
        })
    }
}

fn is_image_array(name: &str) -> bool {
    name == "Array_2D_Image" || name == "Array_3D_Image"
}

#[derive(Default)]
struct ProductBuilder {
    product_class: Option<String>,
    lid: Option<String>,
    title: Option<String>,
    start_time: Option<String>,
    instrument: Option<String>,
    file_name: Option<String>,
    arrays: Vec<ArrayDescriptor>,
    file_areas_seen: usize,
    array: Option<ArrayBuilder>,
    component: Option<(Option<String>, Option<String>)>,
}

impl ProductBuilder {
    fn in_first_file_area(stack: &[String], seen: usize) -> bool {
        seen == 1 && stack.iter().any(|s| s == "File_Area_Observational")
    }

    fn start(&mut self, stack: &[String], name: &str) {
        match name {
            "File_Area_Observational" => self.file_areas_seen += 1,
            "Observing_System_Component" => self.component = Some((None, None)),
            "Axis_Array" => {
                if let Some(a) = self.array.as_mut() {
                    a.axes.push(AxisBuilder::default());
                }
            }
            n if is_image_array(n) && Self::in_first_file_area(stack, self.file_areas_seen) => {
                self.array = Some(ArrayBuilder::new(n));
            }
            _ => {}
        }
    }

    fn end(&mut self, stack: &[String], name: &str, text: &str) -> Result<(), LabelError> {
        let parent = stack.iter().rev().nth(1).map(String::as_str).unwrap_or("");
        let text = text.trim();
        if let Some(array) = self.array.as_mut() {
            match (parent, name) {
                (_, n) if is_image_array(n) => {
                    let done = self.array.take().unwrap();
                    self.arrays.push(done.finish()?);
                }
                (p, "offset") if is_image_array(p) => {
                    array.offset = Some(parse_number("offset", text)?)
                }
                (p, "axes") if is_image_array(p) => {
                    array.declared_axes = Some(parse_number("axes", text)?)
                }
                ("Element_Array", "data_type") => array.data_type = Some(text.to_string()),
                ("Element_Array", "scaling_factor") => {
                    array.scaling_factor = Some(parse_number("scaling_factor", text)?)
                }
                ("Element_Array", "value_offset") => {
                    array.value_offset = Some(parse_number("value_offset", text)?)
                }
                ("Special_Constants", "missing_constant") => {
                    array.missing_constant = Some(parse_constant("missing_constant", text)?)
                }
                ("Axis_Array", field) => {
                    if let Some(axis) = array.axes.last_mut() {
                        match field {
                            "axis_name" => axis.name = Some(text.to_string()),
                            "elements" => axis.elements = Some(parse_number("elements", text)?),
                            "sequence_number" => {
                                axis.sequence_number = Some(parse_number("sequence_number", text)?)
                            }
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
            return Ok(());
        }
        match (parent, name) {
            ("Identification_Area", "logical_identifier") if self.lid.is_none() => {
                self.lid = Some(text.to_string())
            }
            ("Identification_Area", "title") if self.title.is_none() => {
                self.title = Some(text.to_string())
            }
            ("Time_Coordinates", "start_date_time") if self.start_time.is_none() => {
                self.start_time = Some(text.to_string())
            }
            ("Observing_System_Component", "name") => {
                if let Some(c) = self.component.as_mut() {
                    c.0 = Some(text.to_string());
                }
            }
            ("Observing_System_Component", "type") => {
                if let Some(c) = self.component.as_mut() {
                    c.1 = Some(text.to_string());
                }
            }
            (_, "Observing_System_Component") => {
                if let Some((Some(n), Some(t))) = self.component.take() {
                    if t.eq_ignore_ascii_case("instrument") && self.instrument.is_none() {
                        self.instrument = Some(n);
                    }
                }
            }
            ("File", "file_name")
                if self.file_name.is_none()
                    && Self::in_first_file_area(stack, self.file_areas_seen) =>
            {
                self.file_name = Some(text.to_string())
            }
            _ => {}
        }
        Ok(())
    }
}

fn local_name(raw: &[u8]) -> String {
    String::from_utf8_lossy(raw).into_owned()
}

/// Extracts the product class, identifiers and every image array of the first
/// `File_Area_Observational`. Axes come back sorted by `sequence_number`.
pub fn parse_pds4(xml_text: &str) -> Result<Pds4Product, LabelError> {
    let mut reader = Reader::from_str(xml_text);
    reader.config_mut().check_end_names = true;
    let mut stack: Vec<String> = Vec::new();
    let mut text = String::new();
    let mut builder = ProductBuilder::default();
    let malformed = |reader: &Reader<&[u8]>, e: &dyn std::fmt::Display| {
        LabelError::XmlMalformed(format!("at byte {}: {e}", reader.buffer_position()))
    };
    loop {
        let event = reader.read_event().map_err(|e| malformed(&reader, &e))?;
        match event {
            Event::Start(e) => {
                let name = local_name(e.local_name().as_ref());
                if stack.is_empty() {
                    if builder.product_class.is_some() {
                        return Err(LabelError::XmlMalformed(
                            "more than one root element".into(),
                        ));
                    }
                    builder.product_class = Some(name.clone());
                }
                stack.push(name.clone());
                builder.start(&stack, &name);
                text.clear();
            }
            Event::Empty(e) => {
                if stack.is_empty() {
                    return Err(LabelError::XmlMalformed("empty root element".into()));
                }
                let name = local_name(e.local_name().as_ref());
                stack.push(name.clone());
                builder.start(&stack, &name);
                builder.end(&stack, &name, "")?;
                stack.pop();
            }
            Event::Text(t) => {
                let s = t.unescape().map_err(|e| malformed(&reader, &e))?;
                text.push_str(&s);
            }
            Event::CData(t) => text.push_str(&String::from_utf8_lossy(&t)),
            Event::End(e) => {
                let name = local_name(e.local_name().as_ref());
                builder.end(&stack, &name, &text)?;
                stack.pop();
                text.clear();
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(LabelError::XmlMalformed(format!(
            "unclosed element <{}>",
            stack.last().unwrap()
        )));
    }
    let product_class = builder
        .product_class
        .ok_or_else(|| LabelError::XmlMalformed("no root element".into()))?;
    let file_name = builder
        .file_name
        .filter(|f| !f.is_empty())
        .ok_or(LabelError::MissingFileArea)?;
    Ok(Pds4Product {
        product_class,
        logical_identifier: builder.lid.unwrap_or_default(),
        title: builder.title,
        start_time: builder.start_time,
        instrument: builder.instrument,
        file_name,
        arrays: builder.arrays,
    })
}

// ---------------------------------------------------------------------------
// PDS3

fn find_block<'a>(label: &'a OdlLabel, name: &str) -> Option<&'a OdlBlock> {
    label.child(name).or_else(|| {
        label
            .children
            .iter()
            .find_map(|c| find_block(&c.body, name))
    })
}

fn sample_type(bits: i64, kind: &str) -> Option<ElementType> {
    use ElementType::*;
    let kind = kind.trim().to_ascii_uppercase().replace(' ', "_");
    let lsb = kind.starts_with("LSB_") || kind.starts_with("PC_") || kind.starts_with("VAX_");
    let base = kind
        .trim_start_matches("MSB_")
        .trim_start_matches("LSB_")
        .trim_start_matches("PC_")
        .trim_start_matches("VAX_")
        .trim_start_matches("SUN_")
        .trim_start_matches("MAC_");
    let unsigned = match base {
        "UNSIGNED_INTEGER" => true,
        "INTEGER" => false,
        "REAL" | "IEEE_REAL" | "FLOAT" => {
            return match (bits, lsb) {
                (32, false) => Some(F32Be),
                (32, true) => Some(F32Le),
                (64, false) => Some(F64Be),
                (64, true) => Some(F64Le),
                _ => None,
            }
        }
        _ => return None,
    };
    Some(match (bits, unsigned, lsb) {
        (8, true, _) => U8,
        (8, false, _) => I8,
        (16, true, false) => U16Be,
        (16, true, true) => U16Le,
        (16, false, false) => I16Be,
        (16, false, true) => I16Le,
        (32, true, false) => U32Be,
        (32, true, true) => U32Le,
        (32, false, false) => I32Be,
        (32, false, true) => I32Le,
        _ => return None,
    })
}

fn required_count(image: &OdlLabel, keyword: &str) -> Result<u64, LabelError> {
    let value = image
        .get(keyword)
        .ok_or_else(|| OdlError::NotFound(format!("IMAGE/{keyword}")))?;
    match value.as_i64() {
        Some(n) if n >= 1 => Ok(n as u64),
        _ => Err(LabelError::InvalidField {
            field: keyword.to_string(),
            detail: "expected a positive integer".into(),
        }),
    }
}

/// Maps a PDS3 `IMAGE` object and its `^IMAGE` pointer onto an
/// [`ArrayDescriptor`]. `record_bytes` overrides the label's `RECORD_BYTES`.
pub fn descriptor_from_odl(
    label: &OdlLabel,
    record_bytes: Option<u64>,
) -> Result<(ArrayDescriptor, PointerInfo), LabelError> {
    let image = &find_block(label, "IMAGE")
        .ok_or_else(|| OdlError::NotFound("IMAGE".into()))?
        .body;
    let lines = required_count(image, "LINES")?;
    let samples = required_count(image, "LINE_SAMPLES")?;
    let bits = image
        .get("SAMPLE_BITS")
        .and_then(OdlValue::as_i64)
        .ok_or_else(|| OdlError::NotFound("IMAGE/SAMPLE_BITS".into()))?;
    let kind = image
        .get("SAMPLE_TYPE")
        .and_then(OdlValue::as_str)
        .ok_or_else(|| OdlError::NotFound("IMAGE/SAMPLE_TYPE".into()))?;
    let element = sample_type(bits, kind).ok_or_else(|| LabelError::UnsupportedSampleType {
        bits,
        sample_type: kind.to_string(),
    })?;
    let bands = match image.get("BANDS") {
        None => None,
        Some(_) => Some(required_count(image, "BANDS")?),
    };
    let interleave = match image.get("BAND_STORAGE_TYPE").and_then(OdlValue::as_str) {
        None => Interleave::BandSequential,
        Some(s) => match s.to_ascii_uppercase().as_str() {
            "BAND_SEQUENTIAL" => Interleave::BandSequential,
            "LINE_INTERLEAVED" => Interleave::LineInterleaved,
            "SAMPLE_INTERLEAVED" => Interleave::PixelInterleaved,
            other => {
                return Err(LabelError::InvalidField {
                    field: "BAND_STORAGE_TYPE".into(),
                    detail: format!("unknown storage type {other}"),
                })
            }
        },
    };
    let mut descriptor = ArrayDescriptor::image(lines, samples, bands, interleave, element);
    descriptor.scaling_factor = image
        .get("SCALING_FACTOR")
        .and_then(OdlValue::as_f64)
        .unwrap_or(1.0);
    descriptor.value_offset = image
        .get("OFFSET")
        .and_then(OdlValue::as_f64)
        .unwrap_or(0.0);
    descriptor.missing_constant = image
        .get("MISSING_CONSTANT")
        .or_else(|| image.get("MISSING"))
        .and_then(OdlValue::as_f64);

    let record_bytes = record_bytes.or_else(|| {
        label
            .get("RECORD_BYTES")
            .and_then(OdlValue::as_i64)
            .filter(|&n| n > 0)
            .map(|n| n as u64)
    });
    let pointer = match odl::pointer_target(label, "IMAGE", record_bytes) {
        Ok(p) => p,
        Err(OdlError::NotFound(_)) => PointerInfo {
            target_file: None,
            offset: 0,
            offset_unit: odl::OffsetUnit::Bytes,
        },
        Err(e) => return Err(e.into()),
    };
    descriptor.offset_bytes = pointer.offset;
    Ok((descriptor, pointer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(lines: u64, samples: u64, data_type: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<Product_Observational xmlns="http://pds.nasa.gov/pds4/pds/v1">
  <Identification_Area>
    <logical_identifier>urn:test:minimal</logical_identifier>
  </Identification_Area>
  <File_Area_Observational>
    <File><file_name>min.img</file_name></File>
    <Array_2D_Image>
      <offset unit="byte">0</offset>
      <axes>2</axes>
      <Element_Array><data_type>{data_type}</data_type></Element_Array>
      <Axis_Array><axis_name>Line</axis_name><elements>{lines}</elements><sequence_number>1</sequence_number></Axis_Array>
      <Axis_Array><axis_name>Sample</axis_name><elements>{samples}</elements><sequence_number>2</sequence_number></Axis_Array>
    </Array_2D_Image>
  </File_Area_Observational>
</Product_Observational>"#
        )
    }

    #[test]
    fn minimal_product() {
        let p = parse_pds4(&label(1, 1, "UnsignedByte")).unwrap();
        assert_eq!(p.product_class, "Product_Observational");
        assert_eq!(p.logical_identifier, "urn:test:minimal");
        assert_eq!(p.file_name, "min.img");
        assert_eq!(p.arrays.len(), 1);
        let d = &p.arrays[0];
        assert_eq!((d.lines(), d.samples(), d.bands()), (1, 1, 1));
        assert_eq!(d.element, ElementType::U8);
        assert_eq!(d.offset_bytes, 0);
        assert_eq!(d.scaling_factor, 1.0);
        assert_eq!(d.value_offset, 0.0);
    }

    #[test]
    fn msb2_payload() {
        let p = parse_pds4(&label(128, 128, "UnsignedMSB2")).unwrap();
        assert_eq!(expected_payload_bytes(&p.arrays[0]), Ok(32768));
    }

    #[test]
    fn unsupported_type() {
        assert_eq!(
            parse_pds4(&label(1, 1, "UnsignedMSB8")),
            Err(LabelError::UnsupportedElementType("UnsignedMSB8".into()))
        );
    }

    #[test]
    fn axes_sorted_and_prefixes_ignored() {
        let xml = r#"<pds:Product_Observational xmlns:pds="x">
  <pds:File_Area_Observational>
    <pds:File><pds:file_name>c.img</pds:file_name></pds:File>
    <pds:Array_3D_Image>
      <pds:axes>3</pds:axes>
      <pds:Element_Array>
        <pds:data_type>SignedLSB2</pds:data_type>
        <pds:scaling_factor>0.5</pds:scaling_factor>
        <pds:value_offset>10</pds:value_offset>
      </pds:Element_Array>
      <pds:Axis_Array><pds:axis_name>Band</pds:axis_name><pds:elements>3</pds:elements><pds:sequence_number>3</pds:sequence_number></pds:Axis_Array>
      <pds:Axis_Array><pds:axis_name>Line</pds:axis_name><pds:elements>4</pds:elements><pds:sequence_number>1</pds:sequence_number></pds:Axis_Array>
      <pds:Axis_Array><pds:axis_name>Sample</pds:axis_name><pds:elements>5</pds:elements><pds:sequence_number>2</pds:sequence_number></pds:Axis_Array>
      <pds:Special_Constants><pds:missing_constant>16#8000#</pds:missing_constant></pds:Special_Constants>
    </pds:Array_3D_Image>
  </pds:File_Area_Observational>
</pds:Product_Observational>"#;
        let p = parse_pds4(xml).unwrap();
        let d = &p.arrays[0];
        let seq: Vec<u32> = d.axes.iter().map(|a| a.sequence_number).collect();
        assert_eq!(seq, vec![1, 2, 3]);
        assert_eq!(d.interleave, Interleave::PixelInterleaved);
        assert_eq!((d.lines(), d.samples(), d.bands()), (4, 5, 3));
        assert_eq!(d.element, ElementType::I16Le);
        assert_eq!(d.scaling_factor, 0.5);
        assert_eq!(d.value_offset, 10.0);
        assert_eq!(d.missing_constant, Some(32768.0));
        assert_eq!(p.logical_identifier, "");
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            parse_pds4("<Product_Observational><a></b></Product_Observational>"),
            Err(LabelError::XmlMalformed(_))
        ));
        assert!(matches!(parse_pds4(""), Err(LabelError::XmlMalformed(_))));
        assert!(matches!(
            parse_pds4("<Product_Observational><x>"),
            Err(LabelError::XmlMalformed(_))
        ));
        assert_eq!(
            parse_pds4("<Product_Collection><Identification_Area/></Product_Collection>"),
            Err(LabelError::MissingFileArea)
        );
        let dup = label(2, 2, "UnsignedByte").replace(
            "<sequence_number>2</sequence_number>",
            "<sequence_number>1</sequence_number>",
        );
        assert!(matches!(
            parse_pds4(&dup),
            Err(LabelError::BadAxisNumbering(_))
        ));
    }

    #[test]
    fn odl_descriptor() {
        let l = odl::parse_odl(
            "OBJECT = IMAGE\nLINES = 2\nLINE_SAMPLES = 3\nSAMPLE_BITS = 8\nSAMPLE_TYPE = UNSIGNED_INTEGER\nEND_OBJECT\nEND",
        )
        .unwrap();
        let (d, p) = descriptor_from_odl(&l, None).unwrap();
        assert_eq!(d.axes.len(), 2);
        assert_eq!((d.lines(), d.samples()), (2, 3));
        assert_eq!(d.element, ElementType::U8);
        assert_eq!(d.offset_bytes, 0);
        assert_eq!(p.target_file, None);
    }

    #[test]
    fn odl_sample_types() {
        let make = |bits: u32, ty: &str| {
            odl::parse_odl(&format!(
                "RECORD_BYTES = 100\n^IMAGE = 3\nOBJECT = IMAGE\nLINES = 1\nLINE_SAMPLES = 1\nSAMPLE_BITS = {bits}\nSAMPLE_TYPE = {ty}\nEND_OBJECT\nEND"
            ))
            .unwrap()
        };
        let (d, p) = descriptor_from_odl(&make(16, "MSB_UNSIGNED_INTEGER"), None).unwrap();
        assert_eq!(d.element, ElementType::U16Be);
        assert_eq!(p.offset, 200);
        assert_eq!(d.offset_bytes, 200);
        let (d, _) = descriptor_from_odl(&make(16, "LSB_UNSIGNED_INTEGER"), None).unwrap();
        assert_eq!(d.element, ElementType::U16Le);
        let (d, _) = descriptor_from_odl(&make(32, "PC_REAL"), None).unwrap();
        assert_eq!(d.element, ElementType::F32Le);
        let (_, p) = descriptor_from_odl(&make(8, "UNSIGNED_INTEGER"), Some(10)).unwrap();
        assert_eq!(p.offset, 20);
        assert!(matches!(
            descriptor_from_odl(&make(12, "UNSIGNED_INTEGER"), None),
            Err(LabelError::UnsupportedSampleType { bits: 12, .. })
        ));
    }

    #[test]
    fn odl_bands() {
        let l = odl::parse_odl(
            "OBJECT = IMAGE\nLINES = 2\nLINE_SAMPLES = 3\nBANDS = 3\nBAND_STORAGE_TYPE = SAMPLE_INTERLEAVED\nSAMPLE_BITS = 8\nSAMPLE_TYPE = UNSIGNED_INTEGER\nEND_OBJECT\nEND",
        )
        .unwrap();
        let (d, _) = descriptor_from_odl(&l, None).unwrap();
        assert_eq!(d.interleave, Interleave::PixelInterleaved);
        assert_eq!((d.lines(), d.samples(), d.bands()), (2, 3, 3));
        assert!(matches!(
            descriptor_from_odl(&odl::parse_odl("END").unwrap(), None),
            Err(LabelError::Odl(OdlError::NotFound(_)))
        ));
    }
}
