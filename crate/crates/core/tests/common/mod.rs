//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

pub fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

pub fn random_bytes(rng: &mut Xoshiro256StarStar, n: usize) -> Vec<u8> {
    let mut v = vec![0u8; n];
    rng.fill_bytes(&mut v);
    v
}

/// Uniform draw in `[0, 1)`.
pub fn unit(rng: &mut Xoshiro256StarStar) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn pds4_label(
    lid: &str,
    file_name: &str,
    lines: u64,
    samples: u64,
    data_type: &str,
    instrument: &str,
    start_time: &str,
) -> String {
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<Product_Observational xmlns="http://pds.nasa.gov/pds4/pds/v1">
  <Identification_Area>
    <logical_identifier>{lid}</logical_identifier>
    <version_id>1.0</version_id>
    <title>Synthetic lunar surface image</title>
  </Identification_Area>
  <Observation_Area>
    <Time_Coordinates>
      <start_date_time>{start_time}</start_date_time>
    </Time_Coordinates>
    <Observing_System>
      <Observing_System_Component>
        <name>{instrument}</name>
        <type>Instrument</type>
      </Observing_System_Component>
    </Observing_System>
  </Observation_Area>
  <File_Area_Observational>
    <File><file_name>{file_name}</file_name></File>
    <Array_2D_Image>
      <offset unit="byte">0</offset>
      <axes>2</axes>
      <axis_index_order>Last Index Fastest</axis_index_order>
      <Element_Array><data_type>{data_type}</data_type></Element_Array>
      <Axis_Array><axis_name>Line</axis_name><elements>{lines}</elements><sequence_number>1</sequence_number></Axis_Array>
      <Axis_Array><axis_name>Sample</axis_name><elements>{samples}</elements><sequence_number>2</sequence_number></Axis_Array>
    </Array_2D_Image>
  </File_Area_Observational>
</Product_Observational>
"#
    )
}

/// Writes `<name>.xml` plus `<name>.img` (uint16 big-endian) and returns
/// the label path.
pub fn write_pds4(
    dir: &Path,
    name: &str,
    lines: u64,
    samples: u64,
    camera: &str,
    seed: u64,
) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let img = format!("{name}.img");
    let label = pds4_label(
        &format!("urn:nasa:pds:ce4_synthetic:data:{name}"),
        &img,
        lines,
        samples,
        "UnsignedMSB2",
        camera,
        "2019-01-03T02:48:00.000Z",
    );
    let mut r = rng(seed);
    fs::write(
        dir.join(&img),
        random_bytes(&mut r, (lines * samples * 2) as usize),
    )
    .unwrap();
    let path = dir.join(format!("{name}.xml"));
    fs::write(&path, label).unwrap();
    path
}

fn pds3_image_object(lines: u64, samples: u64, pointer: &str) -> String {
    format!(
        "^IMAGE = {pointer}\n\
         OBJECT = IMAGE\n  \
         LINES = {lines}\n  \
         LINE_SAMPLES = {samples}\n  \
         SAMPLE_TYPE = UNSIGNED_INTEGER\n  \
         SAMPLE_BITS = 8\n  \
         BANDS = 1\n\
         END_OBJECT = IMAGE\n"
    )
}

/// Detached PDS3 label `<name>.lbl` with an 8-bit payload `<name>.img`.
pub fn write_pds3_detached(
    dir: &Path,
    name: &str,
    lines: u64,
    samples: u64,
    camera: &str,
    seed: u64,
) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let img = format!("{}.IMG", name.to_uppercase());
    let text = format!(
        "PDS_VERSION_ID = PDS3\n\
         RECORD_TYPE = UNDEFINED\n\
         PRODUCT_ID = \"{}\"\n\
         INSTRUMENT_ID = \"{camera}\"\n\
         START_TIME = 2019-01-04T10:12:00.000\n\
         {}END\n",
        name.to_uppercase(),
        pds3_image_object(lines, samples, &format!("\"{img}\""))
    );
    let mut r = rng(seed);
    fs::write(
        dir.join(&img),
        random_bytes(&mut r, (lines * samples) as usize),
    )
    .unwrap();
    let path = dir.join(format!("{name}.lbl"));
    fs::write(&path, text).unwrap();
    path
}

/// Attached PDS3 product: two 512-byte label records then the image.
pub fn write_pds3_attached(
    dir: &Path,
    name: &str,
    lines: u64,
    samples: u64,
    camera: &str,
    seed: u64,
) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let text = format!(
        "PDS_VERSION_ID = PDS3\n\
         RECORD_TYPE = FIXED_LENGTH\n\
         RECORD_BYTES = 512\n\
         LABEL_RECORDS = 2\n\
         PRODUCT_ID = \"{}\"\n\
         INSTRUMENT_NAME = \"{camera}\"\n\
         {}END\n",
        name.to_uppercase(),
        pds3_image_object(lines, samples, "3")
    );
    let mut bytes = text.into_bytes();
    assert!(bytes.len() <= 1024);
    bytes.resize(1024, b' ');
    let mut r = rng(seed);
    bytes.extend(random_bytes(&mut r, (lines * samples) as usize));
    let path = dir.join(format!("{name}.lbl"));
    fs::write(&path, bytes).unwrap();
    path
}

/// Mixed archive of seven products across two cameras.
pub fn build_archive(root: &Path) -> Vec<PathBuf> {
    vec![
        write_pds4(&root.join("pcam"), "pcam_0001", 6, 8, "PCAM", 1),
        write_pds4(&root.join("pcam"), "pcam_0002", 5, 7, "PCAM", 2),
        write_pds4(&root.join("tcam"), "tcam_0001", 4, 9, "TCAM", 3),
        write_pds3_detached(&root.join("tcam"), "tcam_0002", 7, 5, "TCAM", 4),
        write_pds3_detached(&root.join("pcam"), "pcam_0003", 3, 3, "PCAM", 5),
        write_pds3_attached(&root.join("lcam"), "lcam_0001", 8, 8, "LCAM", 6),
        write_pds3_attached(&root.join("lcam"), "lcam_0002", 4, 6, "LCAM", 7),
    ]
}

/// Removes the final byte of a file.
pub fn truncate_by_one(path: &Path) {
    let len = fs::metadata(path).unwrap().len();
    let f = fs::OpenOptions::new().write(true).open(path).unwrap();
    f.set_len(len - 1).unwrap();
}

/// Payload file for a label produced by the builders above.
pub fn payload_of(label: &Path) -> PathBuf {
    lunarkit::product::open_label(label).unwrap().data_path
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lunarkit")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str]) -> Run {
    run_cli_env(args, &[])
}

pub fn run_cli_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = std::process::Command::new(bin());
    cmd.args(args).env_remove("LUNARKIT_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Every regular file under `dir`, relative path and contents, sorted.
pub fn tree_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e
                .path()
                .strip_prefix(dir)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Synthetic ODL text in a deliberately irregular layout: mixed
/// indentation, padded `=`, comments and every value kind.
pub fn synthetic_odl(seed: u64) -> String {
    let mut r = rng(seed);
    let mut pick = |n: u64| (r.next_u64() % n) as usize;
    let mut out = String::from("PDS_VERSION_ID = PDS3\n");
    let stmt = |out: &mut String, indent: &str, i: usize, pick: &mut dyn FnMut(u64) -> usize| {
        let pad = " ".repeat(pick(4));
        let value = match pick(11) {
            0 => format!("{}", pick(100_000) as i64 - 50_000),
            1 => format!("{}.{}", pick(1000), pick(1000)),
            2 => format!(
                "{}.{:03} <{}>",
                pick(90),
                pick(1000),
                ["DEG", "ms", "KM", "PIX/DEG"][pick(4)]
            ),
            3 => format!("\"CE{}_GRAS_{}\"", pick(6), pick(10_000)),
            4 => ["MOON", "N/A", "EAST", "PCAML"][pick(4)].to_string(),
            5 => format!(
                "2019-01-{:02}T{:02}:{:02}:{:02}.{:03}Z",
                1 + pick(28),
                pick(24),
                pick(60),
                pick(60),
                pick(1000)
            ),
            6 => format!("({}, {}, {})", pick(10), pick(10), pick(10)),
            7 => format!(
                "{{\"{}\", \"{}\"}}",
                ["RED", "GREEN"][pick(2)],
                ["BLUE", "NIR"][pick(2)]
            ),
            8 => format!("16#{:X}#", pick(65536)),
            9 => format!("{}.5E-{}", pick(9), pick(5)),
            _ => format!("'quoted symbol {}'", pick(100)),
        };
        if pick(5) == 0 {
            out.push_str(&format!("{indent}/* note {i} */\n"));
        }
        out.push_str(&format!("{indent}KEY_{i}{pad}={pad}{value}\n"));
    };
    for i in 0..(2 + pick(6)) {
        stmt(&mut out, "", i, &mut pick);
    }
    for b in 0..(1 + pick(3)) {
        let kind = ["OBJECT", "GROUP"][pick(2)];
        out.push_str(&format!("{kind} = BLOCK_{b}\n"));
        for i in 0..(1 + pick(5)) {
            stmt(&mut out, "  ", i, &mut pick);
        }
        if pick(2) == 0 {
            out.push_str("  GROUP = INNER\n");
            for i in 0..(1 + pick(3)) {
                stmt(&mut out, "    ", i, &mut pick);
            }
            out.push_str("  END_GROUP = INNER\n");
        }
        out.push_str(&format!("END_{kind} = BLOCK_{b}\n"));
    }
    out.push_str("END\n");
    out
}

/// The ODL round-trip corpus: hand-written archive-style labels plus
/// synthetic ones.
pub fn odl_corpus() -> Vec<(String, Vec<u8>)> {
    let mut corpus: Vec<(String, Vec<u8>)> = fs::read_dir(fixtures_dir().join("odl"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    corpus.sort();
    for seed in 0..16 {
        corpus.push((
            format!("synthetic_{seed}"),
            synthetic_odl(seed).into_bytes(),
        ));
    }
    corpus
}

/// Reads one element by type name straight from the byte layout.
pub fn oracle_element(name: &str, b: &[u8]) -> f64 {
    macro_rules! be {
        ($t:ty, $n:expr) => {
            <$t>::from_be_bytes(b[..$n].try_into().unwrap()) as f64
        };
    }
    macro_rules! le {
        ($t:ty, $n:expr) => {
            <$t>::from_le_bytes(b[..$n].try_into().unwrap()) as f64
        };
    }
    match name {
        "uint8" => b[0] as f64,
        "int8" => b[0] as i8 as f64,
        "uint16_be" => be!(u16, 2),
        "uint16_le" => le!(u16, 2),
        "int16_be" => be!(i16, 2),
        "int16_le" => le!(i16, 2),
        "uint32_be" => be!(u32, 4),
        "uint32_le" => le!(u32, 4),
        "int32_be" => be!(i32, 4),
        "int32_le" => le!(i32, 4),
        "float32_be" => be!(f32, 4),
        "float32_le" => le!(f32, 4),
        "float64_be" => be!(f64, 8),
        "float64_le" => le!(f64, 8),
        other => panic!("unknown element type {other}"),
    }
}

pub fn oracle_width(name: &str) -> usize {
    match name {
        "uint8" | "int8" => 1,
        n if n.contains("16") => 2,
        n if n.contains("32") => 4,
        _ => 8,
    }
}

/// Decodes by enumerating every (band, line, sample) and computing where
/// that element sits in the payload for the named interleave.
pub fn oracle_decode(
    lines: usize,
    samples: usize,
    bands: usize,
    interleave: &str,
    element: &str,
    offset: usize,
    payload: &[u8],
) -> Vec<f64> {
    let w = oracle_width(element);
    let mut out = Vec::with_capacity(lines * samples * bands);
    for b in 0..bands {
        for l in 0..lines {
            for s in 0..samples {
                let index = match interleave {
                    "band_sequential" => (b * lines + l) * samples + s,
                    "line_interleaved" => (l * bands + b) * samples + s,
                    "pixel_interleaved" => (l * samples + s) * bands + b,
                    other => panic!("unknown interleave {other}"),
                };
                let at = offset + index * w;
                out.push(oracle_element(element, &payload[at..at + w]));
            }
        }
    }
    out
}

/// Runs the decoder against the oracle over every shape up to 3x3x3, all
/// element types and interleaves. Returns (cases, mismatches).
pub fn decode_oracle_sweep(seed: u64) -> (usize, Vec<String>) {
    use lunarkit::array::{ArrayDescriptor, ElementType, Interleave};
    let mut r = rng(seed);
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for element in ElementType::ALL {
        for interleave in Interleave::ALL {
            for bands in [None, Some(1u64), Some(2), Some(3)] {
                for lines in 1..=3u64 {
                    for samples in 1..=3u64 {
                        let mut d =
                            ArrayDescriptor::image(lines, samples, bands, interleave, element);
                        let offset = (r.next_u64() % 5) as usize;
                        let trailing = (r.next_u64() % 3) as usize;
                        d.offset_bytes = offset as u64;
                        let nb = bands.unwrap_or(1) as usize;
                        let n = lines as usize * samples as usize * nb * element.width();
                        let payload = random_bytes(&mut r, offset + n + trailing);
                        let layout = if bands.is_some() {
                            interleave.name()
                        } else {
                            "band_sequential"
                        };
                        let want = oracle_decode(
                            lines as usize,
                            samples as usize,
                            nb,
                            layout,
                            element.name(),
                            offset,
                            &payload,
                        );
                        cases += 1;
                        let got = match lunarkit::raster::decode(&d, &payload) {
                            Ok(g) => g.raster,
                            Err(e) => {
                                mismatches.push(format!(
                                    "{element} {layout} {lines}x{samples}x{nb}: {e}"
                                ));
                                continue;
                            }
                        };
                        let same = got.width == samples as usize
                            && got.height == lines as usize
                            && got.bands == nb
                            && got.samples.len() == want.len()
                            && got
                                .samples
                                .iter()
                                .zip(&want)
                                .all(|(a, b)| a.to_bits() == b.to_bits());
                        if !same {
                            mismatches.push(format!("{element} {layout} {lines}x{samples}x{nb}"));
                        }
                    }
                }
            }
        }
    }
    (cases, mismatches)
}

/// Decodes a PNG with the `png` crate into band-sequential samples plus
/// (width, height, bands, bit depth) and any tEXt chunks.
pub type ReferenceImage = (usize, usize, usize, u8, Vec<f64>, Vec<(String, String)>);

pub fn reference_decode(bytes: &[u8]) -> ReferenceImage {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).unwrap();
    let (w, h) = (frame.width as usize, frame.height as usize);
    let bands = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => panic!("unexpected color type {other:?}"),
    };
    let depth = match frame.bit_depth {
        png::BitDepth::Eight => 8u8,
        png::BitDepth::Sixteen => 16,
        other => panic!("unexpected depth {other:?}"),
    };
    let bytes_per = depth as usize / 8;
    let mut out = vec![0.0; w * h * bands];
    for l in 0..h {
        let row = &buf[l * frame.line_size..(l + 1) * frame.line_size];
        for s in 0..w {
            for b in 0..bands {
                let at = (s * bands + b) * bytes_per;
                let v = if bytes_per == 1 {
                    row[at] as f64
                } else {
                    u16::from_be_bytes([row[at], row[at + 1]]) as f64
                };
                out[(b * h + l) * w + s] = v;
            }
        }
    }
    let texts = reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .map(|t| (t.keyword.clone(), t.text.clone()))
        .collect();
    (w, h, bands, depth, out, texts)
}

/// Writes `count` random quantized rasters cycling through {8,16}-bit x
/// {1,3} bands and checks each against the reference decoder.
pub fn png_round_trip_sweep(count: usize, seed: u64) -> Vec<String> {
    use lunarkit::png_export::{write_png, BitDepth};
    use lunarkit::raster::ImageRaster;
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for i in 0..count {
        let depth = if i % 2 == 0 {
            BitDepth::Eight
        } else {
            BitDepth::Sixteen
        };
        let bands = if (i / 2) % 2 == 0 { 1 } else { 3 };
        let w = 1 + (r.next_u64() % 48) as usize;
        let h = 1 + (r.next_u64() % 48) as usize;
        let max = depth.max_value() as u64 + 1;
        // Mix smooth gradients with noise so every filter type gets chosen.
        let samples: Vec<f64> = (0..w * h * bands)
            .map(|k| {
                if i % 3 == 0 {
                    ((k as u64 * 37) % max) as f64
                } else {
                    (r.next_u64() % max) as f64
                }
            })
            .collect();
        let raster = ImageRaster::new(w, h, bands, samples);
        let mut bytes = Vec::new();
        if let Err(e) = write_png(&raster, depth, Some("round-trip"), &mut bytes) {
            failures.push(format!("raster {i}: {e}"));
            continue;
        }
        let (dw, dh, db, dd, values, _) = reference_decode(&bytes);
        if (dw, dh, db, dd) != (w, h, bands, depth.bits()) || values != raster.samples {
            failures.push(format!(
                "raster {i}: {w}x{h}x{bands} at {} bits differs",
                depth.bits()
            ));
        }
    }
    failures
}

/// Value of a constant discriminator `d` when real and generated samples
/// share one distribution, over the grid d = k/1000, k = 1..=999.
/// Returns (best value, best d, every value).
pub fn constant_discriminator_sweep() -> (f64, f64, Vec<f64>) {
    use lunarkit::gan::{gan_value_estimate, ProbBatch};
    let values: Vec<f64> = (1..=999)
        .map(|k| {
            let d = k as f64 / 1000.0;
            gan_value_estimate(&ProbBatch::new(&[d, d, d], &[d, d, d]).unwrap())
        })
        .collect();
    let (k, best) = values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
        );
    (best, (k + 1) as f64 / 1000.0, values)
}

/// Checks cycle_loss on `count` random pairs: non-negative, zero on
/// identical input, equal to a plain loop within 1e-12 relative.
pub fn cycle_loss_sweep(count: usize, seed: u64) -> Vec<String> {
    use lunarkit::gan::cycle_loss;
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for i in 0..count {
        let n = 1 + (r.next_u64() % 4096) as usize;
        let x: Vec<f64> = (0..n).map(|_| unit(&mut r) * 2.0 - 1.0).collect();
        let y: Vec<f64> = (0..n).map(|_| unit(&mut r) * 2.0 - 1.0).collect();
        let got = cycle_loss(&x, &y).unwrap();
        let mut total = 0.0;
        for k in 0..n {
            total += (x[k] - y[k]).abs();
        }
        let want = total / n as f64;
        let rel = if want == 0.0 {
            got.abs()
        } else {
            ((got - want) / want).abs()
        };
        if got < 0.0 || rel > 1e-12 {
            failures.push(format!("pair {i}: {got} vs {want}"));
        }
        if cycle_loss(&x, &x).unwrap() != 0.0 {
            failures.push(format!("pair {i}: identical input gives nonzero loss"));
        }
    }
    failures
}
