//! Tools for Chang'E-class lunar mission archives: PDS3 ODL and PDS4 XML
//! labels, binary raster decoding, PNG export, deterministic unpaired
//! dataset manifests, and the adversarial / cycle-consistency objectives
//! used to train translators between those datasets.

pub mod array;
pub mod cli;
pub mod gan;
pub mod manifest;
pub mod odl;
pub mod pds4;
pub mod png_export;
pub mod product;
pub mod raster;

pub use array::{expected_payload_bytes, ArrayDescriptor, AxisSpec, ElementType, Interleave};
pub use odl::{parse_odl, serialize_odl, OdlLabel, OdlValue};
pub use pds4::{descriptor_from_odl, parse_pds4, Pds4Product};
pub use raster::{decode, ImageRaster};
