//! Binary portable graymap (P5) reading and writing for 8-bit frames.

use crate::error::{Error, Result};
use crate::raster::Raster;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Writes a raster as a binary P5 graymap. Values are rounded and clamped to
/// `[0, maxval]`.
pub fn write_pgm(path: &Path, raster: &Raster<f64>, maxval: u8) -> Result<()> {
    let mut bytes = Vec::with_capacity(32 + raster.len());
    bytes.extend_from_slice(
        format!("P5\n{} {}\n{}\n", raster.width(), raster.height(), maxval).as_bytes(),
    );
    for &v in raster.as_slice() {
        bytes.push(v.round().clamp(0.0, maxval as f64) as u8);
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

/// Writes raw byte codes (reason rasters and masks) as a P5 graymap.
pub fn write_pgm_bytes(path: &Path, raster: &Raster<u8>) -> Result<()> {
    let mut bytes = Vec::with_capacity(32 + raster.len());
    bytes.extend_from_slice(
        format!("P5\n{} {}\n255\n", raster.width(), raster.height()).as_bytes(),
    );
    bytes.extend_from_slice(raster.as_slice());
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

/// Pulls the next whitespace-delimited token, skipping `#` comments.
fn next_token(data: &[u8], pos: &mut usize) -> Option<String> {
    while *pos < data.len() {
        let b = data[*pos];
        if b == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos > start {
        Some(String::from_utf8_lossy(&data[start..*pos]).into_owned())
    } else {
        None
    }
}

/// Reads a binary P5 graymap with a maxval of at most 255.
///
/// Wider sample formats (maxval above 255 means two bytes per sample) are
/// rejected; this loader backs 8-bit manifests only.
pub fn read_pgm(path: &Path) -> Result<(Raster<f64>, u16)> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let magic = next_token(&data, &mut pos)
        .ok_or_else(|| Error::load(path, "missing graymap header"))?;
    if magic != "P5" {
        return Err(Error::load(path, format!("expected P5 magic, got '{magic}'")));
    }
    let mut dim = |name: &str| -> Result<usize> {
        next_token(&data, &mut pos)
            .ok_or_else(|| Error::load(path, format!("missing {name}")))?
            .parse::<usize>()
            .map_err(|_| Error::load(path, format!("invalid {name}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval: u16 = next_token(&data, &mut pos)
        .ok_or_else(|| Error::load(path, "missing maxval"))?
        .parse()
        .map_err(|_| Error::load(path, "invalid maxval"))?;
    if maxval == 0 {
        return Err(Error::load(path, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(Error::load(
            path,
            format!("maxval {maxval} needs 16-bit samples, only 8-bit frames are supported"),
        ));
    }
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    let expected = width * height;
    if data.len() < pos + expected {
        return Err(Error::load(
            path,
            format!(
                "truncated pixel data: expected {expected} bytes, found {}",
                data.len().saturating_sub(pos)
            ),
        ));
    }
    let values: Vec<f64> = data[pos..pos + expected].iter().map(|&b| b as f64).collect();
    Ok((Raster::from_vec(width, height, values)?, maxval))
}

/// Reads a P5 graymap as raw byte codes.
pub fn read_pgm_bytes(path: &Path) -> Result<Raster<u8>> {
    let (raster, _) = read_pgm(path)?;
    let bytes: Vec<u8> = raster.as_slice().iter().map(|&v| v as u8).collect();
    Raster::from_vec(raster.width(), raster.height(), bytes)
}
