//! The `lunarkit` command line.
//!
//! Data and JSON go to stdout, diagnostics to stderr. Exit codes: 0 ok,
//! 1 usage error, 2 parse/format error, 3 I/O error, 4 verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::array::expected_payload_bytes;
use crate::gan::{check_report, LossFlag, LossLogLine};
use crate::manifest::{
    build_entries, read_manifest, scan_archive, split_unpaired, write_manifest, write_skips,
    ManifestError, SplitMode, SplitSpec,
};
use crate::png_export::{
    stretch, write_png_file, BitDepth, ExportError, StretchMethod, StretchSpec,
};
use crate::product::{inspect_label, open_label, ProductError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Usage = 1,
    Format = 2,
    Io = 3,
    Verification = 4,
}

#[derive(Parser, Debug)]
#[command(
    name = "lunarkit",
    version,
    about = "PDS3/PDS4 lunar imagery to PNG and unpaired dataset manifests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a parsed PDS3 or PDS4 label
    Inspect {
        label: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Convert one product to PNG
    Convert {
        label: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// minmax, none, or pLO,HI percentiles
        #[arg(long, default_value = "p0.5,99.5")]
        stretch: StretchMethod,
        #[arg(long, default_value_t = 8, value_parser = parse_depth)]
        depth: u8,
    },
    /// Convert every product under ROOT and write a manifest
    Batch {
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to OUT/manifest.jsonl
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Split a manifest into unpaired domains A and B
    Split {
        manifest: PathBuf,
        /// ratio:F or field:NAME=GLOB
        #[arg(long)]
        mode: SplitMode,
        #[arg(long, env = "LUNARKIT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-a")]
        out_a: PathBuf,
        #[arg(long = "out-b")]
        out_b: PathBuf,
    },
    /// Check that every product under ROOT parses and has its full payload
    Verify { root: PathBuf },
    /// Recompute totals in a training loss log
    Losscheck { log: PathBuf },
}

fn parse_depth(s: &str) -> Result<u8, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("depth must be 8 or 16, got {s}")),
    }
}

fn product_status(e: &ProductError) -> ExitStatus {
    if e.is_io() {
        ExitStatus::Io
    } else {
        ExitStatus::Format
    }
}

fn manifest_status(e: &ManifestError) -> ExitStatus {
    match e {
        ManifestError::Io { .. } | ManifestError::Pool(_) => ExitStatus::Io,
        ManifestError::Schema { .. } => ExitStatus::Format,
        ManifestError::EmptyDomain(_) => ExitStatus::Verification,
        ManifestError::InvalidSplit(_) => ExitStatus::Usage,
    }
}

fn fail(status: ExitStatus, err: &dyn std::fmt::Display) -> ExitStatus {
    eprintln!("lunarkit: {err}");
    status
}

fn inspect(label: &Path, json: bool) -> ExitStatus {
    match inspect_label(label) {
        Ok(dump) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&dump.json).unwrap());
            } else {
                print!("{}", dump.text);
            }
            ExitStatus::Ok
        }
        Err(e) => fail(product_status(&e), &e),
    }
}

fn convert(label: &Path, out: &Path, method: StretchMethod, depth: u8) -> ExitStatus {
    let product = match open_label(label) {
        Ok(p) => p,
        Err(e) => return fail(product_status(&e), &e),
    };
    let raster = match product.decode_scaled() {
        Ok(r) => r,
        Err(e) => return fail(product_status(&e), &e),
    };
    let spec = StretchSpec {
        method,
        depth: BitDepth::from_bits(depth).unwrap(),
    };
    let export_status = |e: &ExportError| match e {
        ExportError::Io(_) => ExitStatus::Io,
        _ => ExitStatus::Format,
    };
    let (quantized, bounds) = match stretch(&raster, &spec) {
        Ok(v) => v,
        Err(e) => return fail(export_status(&e), &e),
    };
    if let Err(e) = write_png_file(&quantized, spec.depth, Some(&product.product_id), out) {
        return fail(export_status(&e), &format!("{}: {e}", out.display()));
    }
    let d = &product.descriptor;
    println!(
        "{}x{}x{} {} stretch {} [{}, {}] -> {}",
        d.samples(),
        d.lines(),
        d.bands(),
        d.element,
        method,
        bounds.lo,
        bounds.hi,
        out.display()
    );
    ExitStatus::Ok
}

/// `dir/manifest.jsonl` -> `dir/manifest.skips.jsonl`
pub fn skip_report_path(manifest: &Path) -> PathBuf {
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".into());
    manifest.with_file_name(format!("{stem}.skips.jsonl"))
}

fn batch(root: &Path, out: &Path, manifest: Option<PathBuf>, jobs: usize) -> ExitStatus {
    let scan = match scan_archive(root) {
        Ok(s) => s,
        Err(e) => return fail(manifest_status(&e), &e),
    };
    let built = match build_entries(&scan.pairs, Some(out), jobs) {
        Ok(b) => b,
        Err(e) => return fail(manifest_status(&e), &e),
    };
    let mut skips = scan.orphans;
    skips.extend(built.skips);
    skips.sort_by(|a, b| a.label_path.cmp(&b.label_path));

    let manifest = manifest.unwrap_or_else(|| out.join("manifest.jsonl"));
    if let Err(e) = write_manifest(&built.entries, &manifest) {
        return fail(manifest_status(&e), &e);
    }
    let skip_path = skip_report_path(&manifest);
    if let Err(e) = write_skips(&skips, &skip_path) {
        return fail(manifest_status(&e), &e);
    }
    for s in &skips {
        eprintln!("skipped {}: {}", s.label_path, s.reason);
    }
    eprintln!(
        "{} converted, {} skipped; manifest {}",
        built.entries.len(),
        skips.len(),
        manifest.display()
    );
    if built.entries.is_empty() && !skips.is_empty() {
        ExitStatus::Verification
    } else {
        ExitStatus::Ok
    }
}

fn split(manifest: &Path, mode: SplitMode, seed: u64, out_a: &Path, out_b: &Path) -> ExitStatus {
    let entries = match read_manifest(manifest) {
        Ok(e) => e,
        Err(e) => return fail(manifest_status(&e), &e),
    };
    let (a, b) = match split_unpaired(&entries, &SplitSpec { seed, mode }) {
        Ok(v) => v,
        Err(e) => return fail(manifest_status(&e), &e),
    };
    for (entries, path) in [(&a, out_a), (&b, out_b)] {
        if let Err(e) = write_manifest(entries, path) {
            return fail(manifest_status(&e), &e);
        }
    }
    eprintln!("A: {} entries, B: {} entries", a.len(), b.len());
    ExitStatus::Ok
}

fn verify(root: &Path) -> ExitStatus {
    let scan = match scan_archive(root) {
        Ok(s) => s,
        Err(e) => return fail(manifest_status(&e), &e),
    };
    let mut lines: Vec<(String, Result<(), String>)> = Vec::new();
    for pair in &scan.pairs {
        let d = &pair.product.descriptor;
        let outcome = match (expected_payload_bytes(d), pair.product.payload_len()) {
            (Err(e), _) => Err(format!("Overflow: {e}")),
            (_, Err(e)) => Err(e.reason()),
            (Ok(expected), Ok(actual)) => {
                let available = actual.saturating_sub(d.offset_bytes);
                if available >= expected {
                    Ok(())
                } else {
                    Err(format!(
                        "PayloadTooShort: expected {expected} bytes from offset {}, found {available}",
                        d.offset_bytes
                    ))
                }
            }
        };
        lines.push((pair.label_path.clone(), outcome));
    }
    for orphan in &scan.orphans {
        lines.push((orphan.label_path.clone(), Err(orphan.reason.clone())));
    }
    lines.sort_by(|a, b| a.0.cmp(&b.0));
    let mut failed = 0;
    for (label, outcome) in &lines {
        match outcome {
            Ok(()) => println!("PASS {label}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {label}: {reason}");
            }
        }
    }
    eprintln!("{} products, {failed} failed", lines.len());
    if failed > 0 {
        ExitStatus::Verification
    } else {
        ExitStatus::Ok
    }
}

fn losscheck(log: &Path) -> ExitStatus {
    let file = match File::open(log) {
        Ok(f) => f,
        Err(e) => return fail(ExitStatus::Io, &format!("{}: {e}", log.display())),
    };
    let mut checked = 0usize;
    let mut flagged = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => return fail(ExitStatus::Io, &format!("{}: {e}", log.display())),
        };
        if line.trim().is_empty() {
            continue;
        }
        let entry: LossLogLine = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                return fail(
                    ExitStatus::Format,
                    &format!("{}:{}: {e}", log.display(), i + 1),
                )
            }
        };
        checked += 1;
        for flag in check_report(&entry.report) {
            flagged += 1;
            let what = match flag {
                LossFlag::TotalMismatch { recomputed, logged } => {
                    format!("total {logged} but components give {recomputed}")
                }
                LossFlag::NegativeCycle { forward, backward } => {
                    format!("negative cycle loss (forward {forward}, backward {backward})")
                }
                LossFlag::NonFinite => "non-finite loss value".to_string(),
            };
            println!("FAIL line {} step {}: {what}", i + 1, entry.step);
        }
    }
    if flagged > 0 {
        eprintln!("{checked} lines checked, {flagged} flagged");
        ExitStatus::Verification
    } else {
        println!("PASS {checked} lines");
        ExitStatus::Ok
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => ExitStatus::Usage as i32,
            };
        }
    };
    let status = match cli.command {
        Command::Inspect { label, json } => inspect(&label, json),
        Command::Convert {
            label,
            out,
            stretch,
            depth,
        } => convert(&label, &out, stretch, depth),
        Command::Batch {
            root,
            out,
            manifest,
            jobs,
        } => batch(&root, &out, manifest, jobs),
        Command::Split {
            manifest,
            mode,
            seed,
            out_a,
            out_b,
        } => split(&manifest, mode, seed, &out_a, &out_b),
        Command::Verify { root } => verify(&root),
        Command::Losscheck { log } => losscheck(&log),
    };
    status as i32
}
