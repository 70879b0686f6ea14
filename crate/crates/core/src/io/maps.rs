//! Persistence of retrieval results and phase maps as float maps plus
//! 8-bit rasters, with a metadata sidecar. Writers are deterministic, so
//! identical inputs produce byte-identical files.

use crate::error::{Error, Result};
use crate::io::pfm::{read_pfm, write_pfm};
use crate::io::pgm::{read_pgm_bytes, write_pgm_bytes};
use crate::io::sidecar::write_keyvalues;
use crate::raster::{PhaseMap, Raster};
use crate::retrieve::{InvalidReason, RetrievalResult};
use std::fs;
use std::path::Path;

pub const PHASE_FILE: &str = "phase.pfm";
pub const BACKGROUND_FILE: &str = "background.pfm";
pub const MODULATION_FILE: &str = "modulation.pfm";
pub const SAMPLES_FILE: &str = "samples.pgm";
pub const REASONS_FILE: &str = "reasons.pgm";
pub const MAPS_META_FILE: &str = "maps.meta";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes a retrieval result into `dir`: float maps for phase, background,
/// and modulation; byte rasters for sample counts and per-pixel reasons; and
/// a sidecar summarizing validity. Extra key-value pairs (the producing
/// command's configuration) are appended to the sidecar verbatim.
pub fn save_maps(
    result: &RetrievalResult,
    dir: &Path,
    extra_meta: &[(String, String)],
) -> Result<()> {
    ensure_dir(dir)?;
    write_pfm(&dir.join(PHASE_FILE), &result.wrapped.values)?;
    write_pfm(&dir.join(BACKGROUND_FILE), &result.background)?;
    write_pfm(&dir.join(MODULATION_FILE), &result.modulation)?;

    let samples: Vec<u8> = result
        .samples_used
        .as_slice()
        .iter()
        .map(|&k| k.min(255) as u8)
        .collect();
    write_pgm_bytes(
        &dir.join(SAMPLES_FILE),
        &Raster::from_vec(result.width(), result.height(), samples)?,
    )?;

    let reasons: Vec<u8> = result.reasons.as_slice().iter().map(|r| r.code()).collect();
    write_pgm_bytes(
        &dir.join(REASONS_FILE),
        &Raster::from_vec(result.width(), result.height(), reasons)?,
    )?;

    let counts = result.reason_counts();
    let mut pairs = vec![
        ("width".to_string(), result.width().to_string()),
        ("height".to_string(), result.height().to_string()),
        ("valid_pixels".to_string(), counts[0].to_string()),
        ("too_few_samples".to_string(), counts[1].to_string()),
        ("ill_conditioned".to_string(), counts[2].to_string()),
        ("zero_modulation".to_string(), counts[3].to_string()),
    ];
    pairs.extend_from_slice(extra_meta);
    write_keyvalues(&dir.join(MAPS_META_FILE), &pairs)
}

/// Reads a directory written by [`save_maps`] back into a retrieval result.
///
/// Float maps are stored as 32-bit samples, so values narrow once on the
/// first save; reloads after that are exact.
pub fn load_maps(dir: &Path) -> Result<RetrievalResult> {
    let phase = read_pfm(&dir.join(PHASE_FILE))?;
    let background = read_pfm(&dir.join(BACKGROUND_FILE))?;
    let modulation = read_pfm(&dir.join(MODULATION_FILE))?;
    let samples = read_pgm_bytes(&dir.join(SAMPLES_FILE))?;
    let reason_codes = read_pgm_bytes(&dir.join(REASONS_FILE))?;

    let reasons_vec: Result<Vec<InvalidReason>> = reason_codes
        .as_slice()
        .iter()
        .map(|&code| {
            InvalidReason::from_code(code).ok_or_else(|| {
                Error::load(
                    dir.join(REASONS_FILE),
                    format!("unknown reason code {code}"),
                )
            })
        })
        .collect();
    let reasons = Raster::from_vec(phase.width(), phase.height(), reasons_vec?)?;
    let mask: Vec<bool> = reasons
        .as_slice()
        .iter()
        .map(|&r| r == InvalidReason::None)
        .collect();
    let samples_u32: Vec<u32> = samples.as_slice().iter().map(|&b| b as u32).collect();

    Ok(RetrievalResult {
        wrapped: PhaseMap::new(
            phase.clone(),
            Raster::from_vec(phase.width(), phase.height(), mask)?,
        )?,
        background,
        modulation,
        samples_used: Raster::from_vec(phase.width(), phase.height(), samples_u32)?,
        reasons,
    })
}

/// Writes a bare phase map (for unwrapped outputs): `<stem>.pfm` plus a
/// 0/255 validity mask `<stem>_mask.pgm`.
pub fn save_phase_map(map: &PhaseMap, dir: &Path, stem: &str) -> Result<()> {
    ensure_dir(dir)?;
    write_pfm(&dir.join(format!("{stem}.pfm")), &map.values)?;
    let mask: Vec<u8> = map
        .mask
        .as_slice()
        .iter()
        .map(|&m| if m { 255 } else { 0 })
        .collect();
    write_pgm_bytes(
        &dir.join(format!("{stem}_mask.pgm")),
        &Raster::from_vec(map.width(), map.height(), mask)?,
    )
}

/// Reads `<stem>.pfm` (+ optional `<stem>_mask.pgm`) back into a phase map.
pub fn load_phase_map(dir: &Path, stem: &str) -> Result<PhaseMap> {
    let values = read_pfm(&dir.join(format!("{stem}.pfm")))?;
    let mask_path = dir.join(format!("{stem}_mask.pgm"));
    let mask = if mask_path.exists() {
        let bytes = read_pgm_bytes(&mask_path)?;
        let flags: Vec<bool> = bytes.as_slice().iter().map(|&b| b != 0).collect();
        Raster::from_vec(values.width(), values.height(), flags)?
    } else {
        Raster::filled(values.width(), values.height(), true)
    };
    PhaseMap::new(values, mask)
}
