//! Stack manifests: explicit frame ordering plus the metadata needed to
//! interpret the frames.
//!
//! Frame order is always spelled out file by file; nothing is inferred from
//! filename patterns, because a silent frame/step misalignment is the most
//! expensive mistake this pipeline can make.

use crate::error::{Error, Result};
use crate::fringe::{FringeKind, FringeStack, PhaseShiftSchedule};
use crate::io::pgm::read_pgm;
use crate::io::sidecar::{lookup, read_keyvalues, write_keyvalues};
use crate::raster::Raster;
use std::path::{Path, PathBuf};

/// Locations and interpretation of one regular/inverted capture pair.
#[derive(Debug, Clone)]
pub struct StackManifest {
    pub regular_frames: Vec<PathBuf>,
    pub inverted_frames: Vec<PathBuf>,
    pub schedule: PhaseShiftSchedule,
    pub bit_depth: u8,
    pub saturation_threshold: f64,
    pub truth: Option<PathBuf>,
}

fn parse_float_list(path: &Path, text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::load(path, format!("invalid {what} entry '{t}'")))
        })
        .collect()
}

fn parse_path_list(base: &Path, text: &str) -> Vec<PathBuf> {
    text.split(',')
        .map(|t| base.join(t.trim()))
        .collect()
}

impl StackManifest {
    /// Reads a manifest, resolving frame paths against the manifest's
    /// directory.
    pub fn read(path: &Path) -> Result<Self> {
        let pairs = read_keyvalues(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        let need = |key: &str| -> Result<&str> {
            lookup(&pairs, key).ok_or_else(|| Error::load(path, format!("missing key '{key}'")))
        };
        let schedule = PhaseShiftSchedule::new(parse_float_list(path, need("schedule")?, "schedule")?)?;
        let bit_depth: u8 = need("bit_depth")?
            .parse()
            .map_err(|_| Error::load(path, "invalid bit_depth"))?;
        let saturation_threshold: f64 = need("saturation_threshold")?
            .parse()
            .map_err(|_| Error::load(path, "invalid saturation_threshold"))?;
        let manifest = StackManifest {
            regular_frames: parse_path_list(&base, need("regular")?),
            inverted_frames: parse_path_list(&base, need("inverted")?),
            schedule,
            bit_depth,
            saturation_threshold,
            truth: lookup(&pairs, "truth").map(|t| base.join(t)),
        };
        manifest.validate(path)?;
        Ok(manifest)
    }

    /// Writes the manifest with frame paths relative to its directory when
    /// possible.
    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let rel = |p: &PathBuf| -> String {
            p.strip_prefix(base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let join = |paths: &[PathBuf]| paths.iter().map(rel).collect::<Vec<_>>().join(",");
        let steps = self
            .schedule
            .steps()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut pairs = vec![
            ("bit_depth".to_string(), self.bit_depth.to_string()),
            (
                "saturation_threshold".to_string(),
                self.saturation_threshold.to_string(),
            ),
            ("schedule".to_string(), steps),
            ("regular".to_string(), join(&self.regular_frames)),
            ("inverted".to_string(), join(&self.inverted_frames)),
        ];
        if let Some(truth) = &self.truth {
            pairs.push(("truth".to_string(), rel(truth)));
        }
        write_keyvalues(path, &pairs)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let n = self.schedule.count();
        if self.regular_frames.len() != n || self.inverted_frames.len() != n {
            return Err(Error::load(
                path,
                format!(
                    "schedule has {n} steps but {} regular and {} inverted frames are listed",
                    self.regular_frames.len(),
                    self.inverted_frames.len()
                ),
            ));
        }
        if self.bit_depth != 8 {
            return Err(Error::load(
                path,
                format!("bit_depth {} unsupported, only 8 is handled", self.bit_depth),
            ));
        }
        if !(self.saturation_threshold > 0.0) {
            return Err(Error::load(path, "saturation_threshold must be positive"));
        }
        Ok(())
    }
}

fn load_frames(
    manifest: &StackManifest,
    paths: &[PathBuf],
    kind: FringeKind,
) -> Result<FringeStack> {
    let level = (1u32 << manifest.bit_depth) - 1;
    let mut frames: Vec<Raster<f64>> = Vec::with_capacity(paths.len());
    let mut saturated: Vec<Raster<bool>> = Vec::with_capacity(paths.len());
    for path in paths {
        let (frame, maxval) = read_pgm(path)?;
        if u32::from(maxval) > level {
            return Err(Error::load(
                path,
                format!(
                    "frame maxval {maxval} exceeds the manifest's {}-bit depth",
                    manifest.bit_depth
                ),
            ));
        }
        if let Some(first) = frames.first() {
            if !frame.same_dims(first) {
                return Err(Error::load(
                    path,
                    format!(
                        "frame is {}x{} but earlier frames are {}x{}",
                        frame.width(),
                        frame.height(),
                        first.width(),
                        first.height()
                    ),
                ));
            }
        }
        let flags: Vec<bool> = frame
            .as_slice()
            .iter()
            .map(|&v| v >= manifest.saturation_threshold)
            .collect();
        saturated.push(Raster::from_vec(frame.width(), frame.height(), flags)?);
        frames.push(frame);
    }
    let stack = FringeStack {
        frames,
        saturated,
        bit_depth: manifest.bit_depth,
        saturation_level: level as f64,
        kind,
        schedule: manifest.schedule.clone(),
    };
    stack.validate()?;
    Ok(stack)
}

/// Loads both stacks named by a manifest, deriving saturation flags from the
/// manifest threshold.
pub fn load_stack(manifest: &StackManifest) -> Result<(FringeStack, FringeStack)> {
    let regular = load_frames(manifest, &manifest.regular_frames, FringeKind::Regular)?;
    let inverted = load_frames(manifest, &manifest.inverted_frames, FringeKind::Inverted)?;
    if regular.width() != inverted.width() || regular.height() != inverted.height() {
        return Err(Error::DimensionMismatch(
            "regular and inverted stacks differ in size".into(),
        ));
    }
    Ok((regular, inverted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fringe::{clip_quantize, peaks_phase, synth_stack, CameraModel};
    use crate::io::pgm::write_pgm;
    use tempfile::tempdir;

    fn write_pair(dir: &Path, scale: f64) -> StackManifest {
        let phase = peaks_phase(24, 16, 3.0).unwrap();
        let schedule = PhaseShiftSchedule::three_step();
        let camera = CameraModel::new(scale).unwrap();
        let mut manifest = StackManifest {
            regular_frames: Vec::new(),
            inverted_frames: Vec::new(),
            schedule: schedule.clone(),
            bit_depth: 8,
            saturation_threshold: 250.0,
            truth: None,
        };
        for kind in [FringeKind::Regular, FringeKind::Inverted] {
            let stack = synth_stack(&phase, &schedule, &camera, 8.0, kind).unwrap();
            let stack = clip_quantize(&stack, &camera).unwrap();
            for (k, frame) in stack.frames.iter().enumerate() {
                let name = match kind {
                    FringeKind::Regular => format!("reg_{k}.pgm"),
                    FringeKind::Inverted => format!("inv_{k}.pgm"),
                };
                let path = dir.join(&name);
                write_pgm(&path, frame, 255).unwrap();
                match kind {
                    FringeKind::Regular => manifest.regular_frames.push(path),
                    FringeKind::Inverted => manifest.inverted_frames.push(path),
                }
            }
        }
        manifest
    }

    #[test]
    fn manifest_round_trip_and_stack_load() {
        let dir = tempdir().unwrap();
        let manifest = write_pair(dir.path(), 1.0);
        let manifest_path = dir.path().join("manifest.txt");
        manifest.write(&manifest_path).unwrap();
        let back = StackManifest::read(&manifest_path).unwrap();
        assert_eq!(back.regular_frames, manifest.regular_frames);
        assert_eq!(back.schedule, manifest.schedule);

        let (reg, inv) = load_stack(&back).unwrap();
        assert_eq!(reg.frame_count(), 3);
        assert_eq!(inv.frame_count(), 3);
        assert_eq!(reg.width(), 24);
        // Unit scale never reaches the 250 threshold's worth of clipping on
        // every frame; flags exist per frame either way.
        assert_eq!(reg.saturated.len(), 3);
    }

    #[test]
    fn frame_count_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let mut manifest = write_pair(dir.path(), 1.0);
        manifest.regular_frames.pop();
        let path = dir.path().join("manifest.txt");
        manifest.write(&path).unwrap();
        let err = StackManifest::read(&path).unwrap_err();
        assert!(err.to_string().contains("3 steps"));
    }

    #[test]
    fn sixteen_bit_frame_in_eight_bit_manifest_is_rejected() {
        let dir = tempdir().unwrap();
        let manifest = write_pair(dir.path(), 1.0);
        // Overwrite one frame with a 16-bit graymap.
        std::fs::write(
            &manifest.regular_frames[1],
            b"P5\n2 2\n65535\n\x00\x01\x00\x02\x00\x03\x00\x04",
        )
        .unwrap();
        let err = load_stack(&manifest).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("reg_1.pgm"), "error should name the frame: {msg}");
    }

    #[test]
    fn missing_frame_is_named() {
        let dir = tempdir().unwrap();
        let manifest = write_pair(dir.path(), 1.0);
        std::fs::remove_file(&manifest.inverted_frames[2]).unwrap();
        let err = load_stack(&manifest).unwrap_err();
        assert!(err.to_string().contains("inv_2.pgm"));
    }

    #[test]
    fn dimension_mismatch_is_named() {
        let dir = tempdir().unwrap();
        let manifest = write_pair(dir.path(), 1.0);
        std::fs::write(&manifest.regular_frames[2], b"P5\n2 2\n255\nabcd").unwrap();
        let err = load_stack(&manifest).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("reg_2.pgm") && msg.contains("2x2"), "{msg}");
    }

    #[test]
    fn threshold_flags_follow_the_manifest() {
        let dir = tempdir().unwrap();
        let mut manifest = write_pair(dir.path(), 1.5);
        manifest.saturation_threshold = 250.0;
        let (reg, _) = load_stack(&manifest).unwrap();
        let flagged: usize = reg.saturated.iter().map(|m| m.count_true()).sum();
        assert!(flagged > 0);
        // A laxer threshold flags strictly fewer samples.
        manifest.saturation_threshold = 255.0;
        let (reg_lax, _) = load_stack(&manifest).unwrap();
        let flagged_lax: usize = reg_lax.saturated.iter().map(|m| m.count_true()).sum();
        assert!(flagged_lax < flagged);
    }
}
