//! Archive scanning and JSON Lines dataset manifests.
//!
//! A manifest line is one product. Keys always appear in this order:
//!
//! ```text
//! v, product_id, label_path, data_path, png_path, width, height, bands,
//! element_type, camera, acquisition_time, domain
//! ```
//!
//! `label_path` and `data_path` are relative to the archive root, `png_path`
//! is relative to the PNG output directory; all use forward slashes.
//!
//! Splits by ratio sort entries by `product_id` and then shuffle them with
//! Fisher-Yates driven by xoshiro256** (Blackman and Vigna). The generator
//! state is expanded from the 64-bit seed with SplitMix64
//! (`z += 0x9E3779B97F4A7C15; z = (z ^ z>>30) * 0xBF58476D1CE4E5B9;
//! z = (z ^ z>>27) * 0x94D049BB133111EB; z ^ z>>31`). For position `i`
//! (from `n-1` down to 1) the swap partner is `(next_u64() * (i+1)) >> 64`
//! computed in 128-bit arithmetic.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::png_export::{stretch, write_png_file, StretchSpec};
use crate::product::{is_label_path, open_label, Product, ProductError};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Schema {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("split leaves domain {0} empty")]
    EmptyDomain(Domain),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    A,
    B,
    #[serde(rename = "unassigned")]
    Unassigned,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::A => "A",
            Domain::B => "B",
            Domain::Unassigned => "unassigned",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub product_id: String,
    pub label_path: String,
    pub data_path: String,
    pub png_path: Option<String>,
    pub width: u64,
    pub height: u64,
    pub bands: u64,
    pub element_type: String,
    pub camera: Option<String>,
    pub acquisition_time: Option<String>,
    pub domain: Domain,
}

/// Wire form of one manifest line; field order is the key order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryLine {
    v: u32,
    product_id: String,
    label_path: String,
    data_path: String,
    #[serde(default)]
    png_path: Option<String>,
    width: u64,
    height: u64,
    bands: u64,
    element_type: String,
    #[serde(default)]
    camera: Option<String>,
    #[serde(default)]
    acquisition_time: Option<String>,
    domain: Domain,
}

impl From<&ManifestEntry> for EntryLine {
    fn from(e: &ManifestEntry) -> Self {
        EntryLine {
            v: MANIFEST_VERSION,
            product_id: e.product_id.clone(),
            label_path: e.label_path.clone(),
            data_path: e.data_path.clone(),
            png_path: e.png_path.clone(),
            width: e.width,
            height: e.height,
            bands: e.bands,
            element_type: e.element_type.clone(),
            camera: e.camera.clone(),
            acquisition_time: e.acquisition_time.clone(),
            domain: e.domain,
        }
    }
}

impl From<EntryLine> for ManifestEntry {
    fn from(l: EntryLine) -> Self {
        ManifestEntry {
            product_id: l.product_id,
            label_path: l.label_path,
            data_path: l.data_path,
            png_path: l.png_path,
            width: l.width,
            height: l.height,
            bands: l.bands,
            element_type: l.element_type,
            camera: l.camera,
            acquisition_time: l.acquisition_time,
            domain: l.domain,
        }
    }
}

/// A product that could not be paired or converted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipRecord {
    pub v: u32,
    pub label_path: String,
    pub data_path: Option<String>,
    pub reason: String,
}

impl SkipRecord {
    pub fn new(label_path: String, data_path: Option<String>, reason: String) -> Self {
        SkipRecord {
            v: MANIFEST_VERSION,
            label_path,
            data_path,
            reason,
        }
    }
}

/// Root-relative path with forward slashes.
pub fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone)]
pub struct ProductPair {
    pub label_path: String,
    pub data_path: String,
    pub product: Product,
}

#[derive(Debug, Clone, Default)]
pub struct ScanResult {
    pub pairs: Vec<ProductPair>,
    pub orphans: Vec<SkipRecord>,
}

fn label_files(root: &Path) -> Result<Vec<PathBuf>, ManifestError> {
    let mut labels = Vec::new();
    for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            ManifestError::Io {
                path,
                source: e
                    .into_io_error()
                    .unwrap_or_else(|| io::Error::other("walk error")),
            }
        })?;
        if entry.file_type().is_file() && is_label_path(entry.path()) {
            labels.push(entry.into_path());
        }
    }
    Ok(labels)
}

/// Pairs every `.xml`/`.lbl` label under `root` with its payload. Labels that
/// cannot be paired become orphans. Pairs are sorted by label path.
pub fn scan_archive(root: &Path) -> Result<ScanResult, ManifestError> {
    fs::read_dir(root).map_err(io_err(root))?;
    let labels = label_files(root)?;
    let opened: Vec<_> = labels.par_iter().map(|p| open_label(p)).collect();
    let mut result = ScanResult::default();
    for (path, outcome) in labels.iter().zip(opened) {
        let label_path = relative_path(root, path);
        match outcome {
            Ok(product) => result.pairs.push(ProductPair {
                label_path,
                data_path: relative_path(root, &product.data_path),
                product,
            }),
            Err(e) => result
                .orphans
                .push(SkipRecord::new(label_path, None, e.reason())),
        }
    }
    result.pairs.sort_by(|a, b| a.label_path.cmp(&b.label_path));
    result
        .orphans
        .sort_by(|a, b| a.label_path.cmp(&b.label_path));
    Ok(result)
}

#[derive(Debug, Clone, Default)]
pub struct BuildOutput {
    pub entries: Vec<ManifestEntry>,
    pub skips: Vec<SkipRecord>,
}

/// File name for a product's PNG: characters outside `[A-Za-z0-9._-]`
/// become `_`.
pub fn png_file_name(product_id: &str) -> String {
    let stem: String = product_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{stem}.png")
}

fn convert_one(
    pair: &ProductPair,
    png_out: Option<(&Path, &str)>,
) -> Result<ManifestEntry, ProductError> {
    let product = &pair.product;
    let d = &product.descriptor;
    let png_path = match png_out {
        None => {
            product.decode()?;
            None
        }
        Some((dir, name)) => {
            let raster = product.decode_scaled()?;
            let spec = StretchSpec::default();
            let io_or_raster = |e: crate::png_export::ExportError| match e {
                crate::png_export::ExportError::Io(source) => ProductError::Io {
                    path: dir.join(name),
                    source,
                },
                crate::png_export::ExportError::Raster(source) => ProductError::Raster {
                    path: product.data_path.clone(),
                    source,
                },
                other => ProductError::Io {
                    path: dir.join(name),
                    source: io::Error::other(other.to_string()),
                },
            };
            let (quantized, _) = stretch(&raster, &spec).map_err(io_or_raster)?;
            write_png_file(
                &quantized,
                spec.depth,
                Some(&product.product_id),
                &dir.join(name),
            )
            .map_err(io_or_raster)?;
            Some(name.to_string())
        }
    };
    Ok(ManifestEntry {
        product_id: product.product_id.clone(),
        label_path: pair.label_path.clone(),
        data_path: pair.data_path.clone(),
        png_path,
        width: d.samples(),
        height: d.lines(),
        bands: d.bands(),
        element_type: d.element.name().to_string(),
        camera: product.camera.clone(),
        acquisition_time: product.acquisition_time.clone(),
        domain: Domain::Unassigned,
    })
}

/// Decodes every pair (and with `png_dir` writes its PNG using the default
/// stretch). Failures become skip records. Output order follows `pairs`
/// whatever the number of `jobs`.
pub fn build_entries(
    pairs: &[ProductPair],
    png_dir: Option<&Path>,
    jobs: usize,
) -> Result<BuildOutput, ManifestError> {
    if let Some(dir) = png_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    // Claim ids and file names in order first so workers never share a path.
    let mut ids = HashSet::new();
    let mut names = HashSet::new();
    let mut skips = Vec::new();
    let mut work = Vec::new();
    for pair in pairs {
        let id = &pair.product.product_id;
        let name = png_file_name(id);
        if !ids.insert(id.clone()) || !names.insert(name.clone()) {
            skips.push(SkipRecord::new(
                pair.label_path.clone(),
                Some(pair.data_path.clone()),
                format!("DuplicateProductId: {id}"),
            ));
            continue;
        }
        work.push((pair, name));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ManifestError::Pool(e.to_string()))?;
    let results: Vec<_> = pool.install(|| {
        work.par_iter()
            .map(|(pair, name)| convert_one(pair, png_dir.map(|d| (d, name.as_str()))))
            .collect()
    });

    let mut entries = Vec::new();
    for ((pair, _), result) in work.iter().zip(results) {
        match result {
            Ok(entry) => entries.push(entry),
            Err(e) => skips.push(SkipRecord::new(
                pair.label_path.clone(),
                Some(pair.data_path.clone()),
                e.reason(),
            )),
        }
    }
    skips.sort_by(|a, b| a.label_path.cmp(&b.label_path));
    Ok(BuildOutput { entries, skips })
}

// ---------------------------------------------------------------------------
// splitting

#[derive(Debug, Clone, PartialEq)]
pub enum SplitMode {
    /// Entries whose `field` matches the glob `pattern` go to A.
    ByPredicate { field: String, pattern: String },
    /// The first `ceil(n * fraction_a)` shuffled entries go to A.
    ByRatio { fraction_a: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub seed: u64,
    pub mode: SplitMode,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    /// `ratio:F` or `field:NAME=GLOB`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(f) = s.strip_prefix("ratio:") {
            let fraction_a: f64 = f.parse().map_err(|_| format!("bad ratio {f:?}"))?;
            return Ok(SplitMode::ByRatio { fraction_a });
        }
        if let Some(rest) = s.strip_prefix("field:") {
            let (field, pattern) = rest
                .split_once('=')
                .ok_or_else(|| format!("expected field:NAME=GLOB, got {s:?}"))?;
            return Ok(SplitMode::ByPredicate {
                field: field.to_string(),
                pattern: pattern.to_string(),
            });
        }
        Err(format!("expected ratio:F or field:NAME=GLOB, got {s:?}"))
    }
}

fn field_value(entry: &ManifestEntry, field: &str) -> Option<Option<String>> {
    Some(match field {
        "product_id" => Some(entry.product_id.clone()),
        "label_path" => Some(entry.label_path.clone()),
        "data_path" => Some(entry.data_path.clone()),
        "png_path" => entry.png_path.clone(),
        "element_type" => Some(entry.element_type.clone()),
        "camera" => entry.camera.clone(),
        "acquisition_time" => entry.acquisition_time.clone(),
        "width" => Some(entry.width.to_string()),
        "height" => Some(entry.height.to_string()),
        "bands" => Some(entry.bands.to_string()),
        _ => return None,
    })
}

/// Index in `0..bound` from one 64-bit draw (multiply-high).
fn bounded(rng: &mut Xoshiro256StarStar, bound: usize) -> usize {
    ((rng.next_u64() as u128 * bound as u128) >> 64) as usize
}

pub fn shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = bounded(&mut rng, i + 1);
        items.swap(i, j);
    }
}

/// Partitions entries into domains A and B. Both sides must be non-empty.
pub fn split_unpaired(
    entries: &[ManifestEntry],
    spec: &SplitSpec,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>), ManifestError> {
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| a.product_id.cmp(&b.product_id));
    let (mut a, mut b): (Vec<_>, Vec<_>) = match &spec.mode {
        SplitMode::ByRatio { fraction_a } => {
            if !(*fraction_a > 0.0 && *fraction_a < 1.0) {
                return Err(ManifestError::InvalidSplit(format!(
                    "fraction_a must lie strictly between 0 and 1, got {fraction_a}"
                )));
            }
            shuffle(&mut sorted, spec.seed);
            let n_a = (sorted.len() as f64 * fraction_a).ceil() as usize;
            let b = sorted.split_off(n_a.min(sorted.len()));
            (sorted, b)
        }
        SplitMode::ByPredicate { field, pattern } => {
            let glob = glob::Pattern::new(pattern).map_err(|e| {
                ManifestError::InvalidSplit(format!("bad pattern {pattern:?}: {e}"))
            })?;
            if field_value(&ManifestEntry::placeholder(), field).is_none() {
                return Err(ManifestError::InvalidSplit(format!(
                    "unknown field {field:?}"
                )));
            }
            sorted.into_iter().partition(|e| {
                field_value(e, field)
                    .flatten()
                    .is_some_and(|v| glob.matches(&v))
            })
        }
    };
    if a.is_empty() {
        return Err(ManifestError::EmptyDomain(Domain::A));
    }
    if b.is_empty() {
        return Err(ManifestError::EmptyDomain(Domain::B));
    }
    a.iter_mut().for_each(|e| e.domain = Domain::A);
    b.iter_mut().for_each(|e| e.domain = Domain::B);
    Ok((a, b))
}

impl ManifestEntry {
    fn placeholder() -> Self {
        ManifestEntry {
            product_id: String::new(),
            label_path: String::new(),
            data_path: String::new(),
            png_path: None,
            width: 0,
            height: 0,
            bands: 0,
            element_type: String::new(),
            camera: None,
            acquisition_time: None,
            domain: Domain::Unassigned,
        }
    }
}

// ---------------------------------------------------------------------------
// JSON Lines

pub fn write_jsonl<T: Serialize, W: Write>(
    items: impl IntoIterator<Item = T>,
    mut out: W,
) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<(), ManifestError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_jsonl(entries.iter().map(EntryLine::from), BufWriter::new(file)).map_err(io_err(path))
}

fn read_lines<T: for<'de> Deserialize<'de>>(
    path: &Path,
    mut check: impl FnMut(&T) -> Result<(), String>,
) -> Result<Vec<T>, ManifestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |detail: String| ManifestError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            detail,
        };
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        match value.get("v").and_then(|v| v.as_u64()) {
            Some(v) if v == MANIFEST_VERSION as u64 => {}
            Some(v) => return Err(schema(format!("unsupported version v={v}"))),
            None => return Err(schema("missing version field \"v\"".into())),
        }
        let item: T = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
        check(&item).map_err(schema)?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut seen = HashSet::new();
    let lines: Vec<EntryLine> = read_lines(path, |l: &EntryLine| {
        if seen.insert(l.product_id.clone()) {
            Ok(())
        } else {
            Err(format!("duplicate product_id {:?}", l.product_id))
        }
    })?;
    Ok(lines.into_iter().map(ManifestEntry::from).collect())
}

pub fn write_skips(skips: &[SkipRecord], path: &Path) -> Result<(), ManifestError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_jsonl(skips, BufWriter::new(file)).map_err(io_err(path))
}

pub fn read_skips(path: &Path) -> Result<Vec<SkipRecord>, ManifestError> {
    read_lines(path, |_: &SkipRecord| Ok(()))
}

// ---------------------------------------------------------------------------
// plain PNG directories

/// (width, height, bit depth, color type) from a PNG's IHDR.
fn png_header(path: &Path) -> io::Result<(u32, u32, u8, u8)> {
    let mut head = [0u8; 26];
    let mut f = File::open(path)?;
    io::Read::read_exact(&mut f, &mut head)?;
    if &head[..8] != b"\x89PNG\r\n\x1a\n" || &head[12..16] != b"IHDR" {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a PNG file"));
    }
    let w = u32::from_be_bytes(head[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(head[20..24].try_into().unwrap());
    Ok((w, h, head[24], head[25]))
}

/// Manifest entries for a directory of plain PNG images (e.g. rendered
/// frames with no PDS labels). All three paths point at the PNG, relative
/// to `root`; the product id is that path without its extension.
pub fn entries_from_png_dir(root: &Path) -> Result<BuildOutput, ManifestError> {
    fs::read_dir(root).map_err(io_err(root))?;
    let mut out = BuildOutput::default();
    for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
        let entry = entry.map_err(|e| ManifestError::Io {
            path: root.to_path_buf(),
            source: e
                .into_io_error()
                .unwrap_or_else(|| io::Error::other("walk error")),
        })?;
        let path = entry.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !entry.file_type().is_file() || !is_png {
            continue;
        }
        let rel = relative_path(root, path);
        match png_header(path) {
            Ok((w, h, depth, color)) => {
                let bands = match color {
                    0 | 3 => 1,
                    4 => 2,
                    2 => 3,
                    _ => 4,
                };
                let element_type = if depth == 16 { "uint16_be" } else { "uint8" };
                let id = rel
                    .rsplit_once('.')
                    .map_or(rel.as_str(), |(s, _)| s)
                    .to_string();
                out.entries.push(ManifestEntry {
                    product_id: id,
                    label_path: rel.clone(),
                    data_path: rel.clone(),
                    png_path: Some(rel),
                    width: w as u64,
                    height: h as u64,
                    bands,
                    element_type: element_type.to_string(),
                    camera: None,
                    acquisition_time: None,
                    domain: Domain::Unassigned,
                });
            }
            Err(e) => out.skips.push(SkipRecord::new(
                rel.clone(),
                Some(rel),
                format!("UnreadableImage: {e}"),
            )),
        }
    }
    Ok(out)
}
