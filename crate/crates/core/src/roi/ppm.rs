//! Binary PPM (P6, maxval 255) frames and frame directories.
//!
//! A word utterance on disk is a directory of `frame_0001.ppm`,
//! `frame_0002.ppm`, ... in temporal order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::RoiFrame;
use crate::error::{Error, Result};

pub fn parse_ppm(bytes: &[u8], origin: &str) -> Result<RoiFrame> {
    let bad = |reason: &str| Error::parse("ppm", origin, reason);
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // Skip whitespace and comments between header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), Some(b'\n') | None) {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while matches!(bytes.get(pos), Some(b) if !b.is_ascii_whitespace()) {
            pos += 1;
        }
        fields.push(&bytes[start..pos]);
    }
    if fields[0] != b"P6" {
        return Err(bad("not a binary P6 file"));
    }
    let num = |f: &[u8], what: &str| -> Result<usize> {
        std::str::from_utf8(f)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(&format!("invalid {what}")))
    };
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let maxval = num(fields[3], "maxval")?;
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !matches!(bytes.get(pos), Some(b) if b.is_ascii_whitespace()) {
        return Err(bad("missing raster"));
    }
    pos += 1;
    let raster = &bytes[pos..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if raster.len() < expected {
        return Err(bad(&format!(
            "raster has {} bytes, expected {expected}",
            raster.len()
        )));
    }
    let pixels = raster[..expected]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    RoiFrame::new(width, height, pixels).map_err(|e| bad(&e.to_string()))
}

pub fn read_ppm(path: &Path) -> Result<RoiFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ppm(&bytes, &path.display().to_string())
}

pub fn encode_ppm(frame: &RoiFrame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.reserve(frame.pixel_count() * 3);
    for p in frame.pixels() {
        out.extend_from_slice(p);
    }
    out
}

pub fn write_ppm(path: &Path, frame: &RoiFrame) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_ppm(frame))
        .map_err(|e| Error::io(path, e))
}

fn frame_index(name: &str) -> Option<u32> {
    name.strip_prefix("frame_")?
        .strip_suffix(".ppm")?
        .parse()
        .ok()
}

/// Lists `frame_NNNN.ppm` files in temporal order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(frame_index) {
            frames.push((idx, entry.path()));
        }
    }
    frames.sort();
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}

pub fn read_frame_dir(dir: &Path) -> Result<Vec<RoiFrame>> {
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        return Err(Error::Empty("frame directory has no frame_NNNN.ppm files"));
    }
    paths.iter().map(|p| read_ppm(p)).collect()
}

pub fn write_frame_dir(dir: &Path, frames: &[RoiFrame]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in frames.iter().enumerate() {
        write_ppm(&dir.join(format!("frame_{:04}.ppm", i + 1)), frame)?;
    }
    Ok(())
}
