//! On-disk formats: complex field blobs, PGM images, dataset bundles.
//!
//! Complex blob (`.c64`): `"PTYC"`, u32 version, u32 height, u32 width, then
//! `height × width` interleaved little-endian f32 `(re, im)` pairs, row-major.
//!
//! Dataset bundle: a directory holding `meta.json`, `patterns.f32`
//! (`"PTYD"`, u32 version, u32 count, u32 height, u32 width, f32 samples),
//! `positions.i32` (little-endian `(row, col)` pairs), `probe.c64` and an
//! optional `object_truth.c64`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField2D, WindowOffset};
use crate::simulator::{Dataset4D, DatasetMeta, GrayImage, PatternStack, DATASET_FORMAT_VERSION};

pub const C64_MAGIC: &[u8; 4] = b"PTYC";
pub const C64_VERSION: u32 = 1;
pub const PATTERNS_MAGIC: &[u8; 4] = b"PTYD";

pub const META_FILE: &str = "meta.json";
pub const PATTERNS_FILE: &str = "patterns.f32";
pub const POSITIONS_FILE: &str = "positions.i32";
pub const PROBE_FILE: &str = "probe.c64";
pub const TRUTH_FILE: &str = "object_truth.c64";

fn format_err(what: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Format {
        what: what.into(),
        reason: reason.into(),
    }
}

/// `%g`-style formatting with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, x);
        let (mant, e) = s.split_once('e').expect("exponent");
        format!("{}e{}", trim_zeros(mant), e)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| format_err(path.display().to_string(), "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn encode_c64(field: &ComplexField2D) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + field.len() * 8);
    out.extend_from_slice(C64_MAGIC);
    out.extend_from_slice(&C64_VERSION.to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    for z in field.as_slice() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn read_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_c64(bytes: &[u8], what: &str) -> Result<ComplexField2D> {
    if bytes.len() < 16 || &bytes[..4] != C64_MAGIC {
        return Err(format_err(what, "missing PTYC header"));
    }
    let version = read_u32(bytes, 4);
    if version != C64_VERSION {
        return Err(format_err(what, format!("unsupported version {version}")));
    }
    let h = read_u32(bytes, 8) as usize;
    let w = read_u32(bytes, 12) as usize;
    if h == 0 || w == 0 || bytes.len() != 16 + h * w * 8 {
        return Err(format_err(
            what,
            format!("{h}x{w} field needs {} bytes, file has {}", 16 + h * w * 8, bytes.len()),
        ));
    }
    let data = (0..h * w)
        .map(|i| {
            let at = 16 + 8 * i;
            Complex64::new(read_f32(bytes, at) as f64, read_f32(bytes, at + 4) as f64)
        })
        .collect();
    ComplexField2D::from_vec(h, w, data)
}

pub fn write_c64(path: &Path, field: &ComplexField2D) -> Result<()> {
    write_atomic(path, &encode_c64(field))
}

pub fn read_c64(path: &Path) -> Result<ComplexField2D> {
    let bytes = fs::read(path).map_err(|e| format_err(path.display().to_string(), e.to_string()))?;
    decode_c64(&bytes, &path.display().to_string())
}

/// Parses a binary (P5) PGM with 8- or 16-bit samples.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut reader = BufReader::new(bytes);
    let mut tokens = Vec::with_capacity(4);
    let mut line = Vec::new();
    while tokens.len() < 4 {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Err(format_err("PGM", "truncated header"));
        }
        let text = String::from_utf8_lossy(&line);
        let text = text.split('#').next().unwrap_or("");
        tokens.extend(text.split_whitespace().map(str::to_owned));
    }
    if tokens.len() != 4 || tokens[0] != "P5" {
        return Err(format_err("PGM", "expected a binary P5 header on its own lines"));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err("PGM", format!("bad header value '{s}'")))
    };
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(format_err("PGM", format!("maxval {maxval} out of range")));
    }
    let mut raster = Vec::new();
    reader.read_to_end(&mut raster)?;
    let bps = if maxval < 256 { 1 } else { 2 };
    if raster.len() < w * h * bps {
        return Err(format_err("PGM", "raster shorter than header dimensions"));
    }
    let pixels = if bps == 1 {
        raster[..w * h].iter().map(|&b| b as u16).collect()
    } else {
        raster[..2 * w * h]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    };
    GrayImage::new(h, w, maxval as u16, pixels)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| format_err(path.display().to_string(), e.to_string()))?;
    decode_pgm(&bytes)
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", image.width, image.height, image.maxval).into_bytes();
    if image.maxval < 256 {
        out.extend(image.pixels.iter().map(|&v| v as u8));
    } else {
        for &v in &image.pixels {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

/// 8-bit rendering of the phase of a region, `[−π, π]` mapped to `[0, 255]`.
pub fn phase_image(field: &ComplexField2D, top: usize, left: usize, height: usize, width: usize) -> GrayImage {
    use std::f64::consts::PI;
    let pixels = (top..top + height)
        .flat_map(|r| (left..left + width).map(move |c| (r, c)))
        .map(|(r, c)| {
            let ph = crate::field::phase_of(field[(r, c)]);
            ((ph + PI) / (2.0 * PI) * 255.0).round().clamp(0.0, 255.0) as u16
        })
        .collect();
    GrayImage {
        height,
        width,
        maxval: 255,
        pixels,
    }
}

pub fn encode_patterns(stack: &PatternStack) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + stack.data.len() * 4);
    out.extend_from_slice(PATTERNS_MAGIC);
    out.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
    for v in [stack.count, stack.height, stack.width] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &v in &stack.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_patterns(bytes: &[u8]) -> Result<PatternStack> {
    if bytes.len() < 20 || &bytes[..4] != PATTERNS_MAGIC {
        return Err(format_err(PATTERNS_FILE, "missing PTYD header"));
    }
    let version = read_u32(bytes, 4);
    if version != DATASET_FORMAT_VERSION {
        return Err(format_err(PATTERNS_FILE, format!("unsupported version {version}")));
    }
    let (n, h, w) = (
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
        read_u32(bytes, 16) as usize,
    );
    let expected = 20 + n * h * w * 4;
    if bytes.len() != expected {
        return Err(format_err(
            PATTERNS_FILE,
            format!("{n}x{h}x{w} stack needs {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let data = (0..n * h * w).map(|i| read_f32(bytes, 20 + 4 * i) as f64).collect();
    let stack = PatternStack {
        count: n,
        height: h,
        width: w,
        data,
    };
    stack.validate().map_err(|e| format_err(PATTERNS_FILE, e.to_string()))?;
    Ok(stack)
}

pub fn encode_positions(offsets: &[WindowOffset]) -> Vec<u8> {
    let mut out = Vec::with_capacity(offsets.len() * 8);
    for o in offsets {
        out.extend_from_slice(&(o.row as i32).to_le_bytes());
        out.extend_from_slice(&(o.col as i32).to_le_bytes());
    }
    out
}

pub fn decode_positions(bytes: &[u8]) -> Result<Vec<WindowOffset>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(format_err(POSITIONS_FILE, "length is not a multiple of 8 bytes"));
    }
    bytes
        .chunks_exact(8)
        .map(|b| {
            let r = i32::from_le_bytes(b[..4].try_into().expect("4 bytes"));
            let c = i32::from_le_bytes(b[4..].try_into().expect("4 bytes"));
            if r < 0 || c < 0 {
                return Err(format_err(POSITIONS_FILE, format!("negative position ({r}, {c})")));
            }
            Ok(WindowOffset::new(r as usize, c as usize))
        })
        .collect()
}

/// Writes a dataset bundle into `dir`, creating it if needed.
pub fn save_dataset(dir: &Path, dataset: &Dataset4D) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = serde_json::to_vec_pretty(&dataset.meta)?;
    write_atomic(&dir.join(META_FILE), &meta)?;
    write_atomic(&dir.join(PATTERNS_FILE), &encode_patterns(&dataset.patterns))?;
    write_atomic(&dir.join(POSITIONS_FILE), &encode_positions(&dataset.grid.offsets))?;
    write_c64(&dir.join(PROBE_FILE), &dataset.probe)?;
    let truth = dir.join(TRUTH_FILE);
    match &dataset.object_truth {
        Some(t) => write_c64(&truth, t)?,
        None if truth.exists() => fs::remove_file(truth)?,
        None => {}
    }
    Ok(())
}

fn read_file(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let p: PathBuf = dir.join(name);
    fs::read(&p).map_err(|e| format_err(p.display().to_string(), e.to_string()))
}

/// Loads and validates a dataset bundle.
pub fn load_dataset(dir: &Path) -> Result<Dataset4D> {
    let mut meta: DatasetMeta =
        serde_json::from_slice(&read_file(dir, META_FILE)?).map_err(|e| format_err(META_FILE, e.to_string()))?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(format_err(
            META_FILE,
            format!("format_version {} is not supported", meta.format_version),
        ));
    }
    let patterns = decode_patterns(&read_file(dir, PATTERNS_FILE)?)?;
    let offsets = decode_positions(&read_file(dir, POSITIONS_FILE)?)?;
    let probe = decode_c64(&read_file(dir, PROBE_FILE)?, PROBE_FILE)?;
    let truth_path = dir.join(TRUTH_FILE);
    let object_truth = if truth_path.exists() {
        Some(read_c64(&truth_path)?)
    } else {
        None
    };
    let mut grid = meta.grid.clone();
    grid.offsets = offsets;
    if patterns.count != grid.offsets.len() {
        return Err(format_err(
            POSITIONS_FILE,
            format!("{} positions for {} patterns", grid.offsets.len(), patterns.count),
        ));
    }
    if (patterns.height, patterns.width) != (grid.detector_h, grid.detector_w) {
        return Err(format_err(
            PATTERNS_FILE,
            "pattern size disagrees with meta.json detector size",
        ));
    }
    if probe.dims() != (patterns.height, patterns.width) {
        return Err(format_err(PROBE_FILE, "probe size disagrees with pattern size"));
    }
    grid.validate().map_err(|e| format_err(POSITIONS_FILE, e.to_string()))?;
    if let Some(t) = &object_truth {
        if t.dims() != grid.canvas_dims() {
            return Err(format_err(TRUTH_FILE, "object truth does not match the scan canvas"));
        }
    }
    meta.grid = grid.clone();
    Ok(Dataset4D {
        patterns,
        grid,
        probe,
        object_truth,
        meta,
    })
}
