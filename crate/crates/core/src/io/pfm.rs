//! Portable float map (Pf) reading and writing for real-valued maps.
//!
//! Grayscale only, 32-bit little-endian samples (scale written as -1.0),
//! scanlines stored bottom-to-top as the format prescribes.

use crate::error::{Error, Result};
use crate::raster::Raster;
use std::fs;
use std::io::Write;
use std::path::Path;

pub fn write_pfm(path: &Path, raster: &Raster<f64>) -> Result<()> {
    let (w, h) = (raster.width(), raster.height());
    let mut bytes = Vec::with_capacity(32 + 4 * raster.len());
    bytes.extend_from_slice(format!("Pf\n{w} {h}\n-1.0\n").as_bytes());
    for row in (0..h).rev() {
        for col in 0..w {
            bytes.extend_from_slice(&(*raster.get(col, row) as f32).to_le_bytes());
        }
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<Raster<f64>> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let mut line = |name: &str| -> Result<String> {
        let start = pos;
        while pos < data.len() && data[pos] != b'\n' {
            pos += 1;
        }
        if pos >= data.len() {
            return Err(Error::load(path, format!("missing {name} line")));
        }
        let text = String::from_utf8_lossy(&data[start..pos]).trim().to_string();
        pos += 1;
        Ok(text)
    };
    let magic = line("magic")?;
    if magic != "Pf" {
        return Err(Error::load(
            path,
            format!("expected grayscale 'Pf' magic, got '{magic}'"),
        ));
    }
    let dims = line("dimensions")?;
    let mut parts = dims.split_whitespace();
    let width: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::load(path, "invalid width"))?;
    let height: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::load(path, "invalid height"))?;
    let scale: f32 = line("scale")?
        .parse()
        .map_err(|_| Error::load(path, "invalid scale"))?;
    let little_endian = scale < 0.0;

    let expected = width * height * 4;
    if data.len() < pos + expected {
        return Err(Error::load(
            path,
            format!(
                "truncated sample data: expected {expected} bytes, found {}",
                data.len().saturating_sub(pos)
            ),
        ));
    }
    let mut raster = Raster::filled(width, height, 0.0f64);
    let mut offset = pos;
    for row in (0..height).rev() {
        for col in 0..width {
            let chunk = [
                data[offset],
                data[offset + 1],
                data[offset + 2],
                data[offset + 3],
            ];
            let v = if little_endian {
                f32::from_le_bytes(chunk)
            } else {
                f32::from_be_bytes(chunk)
            };
            raster.set(col, row, v as f64);
            offset += 4;
        }
    }
    Ok(raster)
}
