//! Synthetic scene and fringe-stack generation with a saturating camera model.
//!
//! A scene is a phase surface; projecting a sinusoidal carrier over it yields a
//! stack of phase-shifted intensity frames. A complementary (inverted) stack
//! carries the same information with every step offset by pi, so that a
//! regular/inverted frame pair sums to twice the background wherever the
//! camera did not clip.

use crate::error::{Error, Result};
use crate::raster::{PhaseMap, Raster};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Ordered phase steps of a shifted fringe sequence, in radians.
///
/// Steps are stored exactly as given; equivalence modulo 2*pi is a property of
/// the solvers, not of this container.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftSchedule {
    steps: Vec<f64>,
}

impl PhaseShiftSchedule {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("schedule must contain at least one step"));
        }
        if steps.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("schedule steps must be finite"));
        }
        Ok(PhaseShiftSchedule { steps })
    }

    /// `count` steps starting at `first`, spaced by `spacing`.
    pub fn uniform(count: usize, first: f64, spacing: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("schedule must contain at least one step"));
        }
        PhaseShiftSchedule::new((0..count).map(|k| first + spacing * k as f64).collect())
    }

    /// The classical three-step sequence {0, 2pi/3, 4pi/3}.
    pub fn three_step() -> Self {
        PhaseShiftSchedule::uniform(3, 0.0, 2.0 * PI / 3.0).expect("static schedule")
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn count(&self) -> usize {
        self.steps.len()
    }

    /// True when the schedule is three steps spaced exactly 2pi/3 apart
    /// (any starting offset), within `tol`.
    pub fn is_equal_three_step(&self, tol: f64) -> bool {
        self.steps.len() == 3
            && self
                .steps
                .windows(2)
                .all(|w| ((w[1] - w[0]) - 2.0 * PI / 3.0).abs() <= tol)
    }
}

/// Whether a stack holds regular frames or their pi-offset complements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FringeKind {
    Regular,
    Inverted,
}

impl FringeKind {
    /// Extra phase added to every step of this stack's frames.
    pub fn step_offset(self) -> f64 {
        match self {
            FringeKind::Regular => 0.0,
            FringeKind::Inverted => PI,
        }
    }
}

/// Camera response parameters used during synthesis.
#[derive(Debug, Clone, Copy)]
pub struct CameraModel {
    /// Scale factor on the ideal fringe amplitude; values above 1 drive
    /// the brightest pixels into clipping.
    pub scale: f64,
    /// Intensity at which the sensor clips (255 for 8-bit).
    pub saturation_level: f64,
    /// Mean of the additive Gaussian noise.
    pub noise_mean: f64,
    /// Variance of the additive Gaussian noise.
    pub noise_variance: f64,
    /// Seed for the noise generator; fixed seeds reproduce stacks bit-exactly.
    pub rng_seed: u64,
}

impl CameraModel {
    pub fn new(scale: f64) -> Result<Self> {
        let model = CameraModel {
            scale,
            saturation_level: 255.0,
            noise_mean: 0.0,
            noise_variance: 0.0,
            rng_seed: 0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_noise(mut self, mean: f64, variance: f64, seed: u64) -> Result<Self> {
        self.noise_mean = mean;
        self.noise_variance = variance;
        self.rng_seed = seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::invalid("camera scale factor must be positive"));
        }
        if !(self.saturation_level > 0.0) {
            return Err(Error::invalid("saturation level must be positive"));
        }
        if self.noise_variance < 0.0 {
            return Err(Error::invalid("noise variance must be nonnegative"));
        }
        Ok(())
    }
}

/// A set of same-sized intensity frames, one per phase step.
///
/// Frames hold real values straight out of `synth_stack`; after
/// `clip_quantize` they hold integers in `[0, saturation_level]` and the
/// per-frame `saturated` masks record which samples reached the level.
#[derive(Debug, Clone)]
pub struct FringeStack {
    pub frames: Vec<Raster<f64>>,
    pub saturated: Vec<Raster<bool>>,
    pub bit_depth: u8,
    pub saturation_level: f64,
    pub kind: FringeKind,
    pub schedule: PhaseShiftSchedule,
}

impl FringeStack {
    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Checks the internal shape contract: one frame and one mask per step,
    /// all with identical dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() != self.schedule.count() {
            return Err(Error::DimensionMismatch(format!(
                "{} frames for a {}-step schedule",
                self.frames.len(),
                self.schedule.count()
            )));
        }
        if self.saturated.len() != self.frames.len() {
            return Err(Error::DimensionMismatch(
                "saturation mask count differs from frame count".into(),
            ));
        }
        let first = &self.frames[0];
        for f in &self.frames {
            if !f.same_dims(first) {
                return Err(Error::DimensionMismatch(
                    "frames do not share dimensions".into(),
                ));
            }
        }
        for m in &self.saturated {
            if !m.same_dims(first) {
                return Err(Error::DimensionMismatch(
                    "saturation masks do not share frame dimensions".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Evaluates the classic two-dimensional peaks surface at a point.
///
/// Used as the ground-truth phase for synthetic scenes; its amplitude is taken
/// directly as radians.
pub fn peaks_value(x: f64, y: f64) -> f64 {
    3.0 * (1.0 - x).powi(2) * (-x * x - (y + 1.0).powi(2)).exp()
        - 10.0 * (x / 5.0 - x.powi(3) - y.powi(5)) * (-x * x - y * y).exp()
        - (1.0 / 3.0) * (-(x + 1.0).powi(2) - y * y).exp()
}

/// Samples the peaks surface on a uniform grid spanning
/// `[-extent, extent]` in both axes (endpoints included).
pub fn peaks_phase(width: usize, height: usize, extent: f64) -> Result<PhaseMap> {
    if width < 2 || height < 2 {
        return Err(Error::invalid("peaks grid needs at least 2x2 pixels"));
    }
    if !(extent > 0.0) {
        return Err(Error::invalid("peaks extent must be positive"));
    }
    let mut values = Raster::filled(width, height, 0.0f64);
    let xs: Vec<f64> = (0..width)
        .map(|c| -extent + 2.0 * extent * c as f64 / (width - 1) as f64)
        .collect();
    values
        .as_mut_slice()
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, out)| {
            let y = -extent + 2.0 * extent * row as f64 / (height - 1) as f64;
            for (col, v) in out.iter_mut().enumerate() {
                *v = peaks_value(xs[col], y);
            }
        });
    PhaseMap::all_valid(values)
}

/// Synthesizes one stack of phase-shifted fringe frames over a phase surface.
///
/// Frame `k` holds `scale * 127.5 * (1 + cos(2*pi*x/period + phi + step_k))`
/// with the column index as `x`, plus an extra pi inside the cosine for
/// inverted stacks. Values are left unclipped; see [`clip_quantize`].
pub fn synth_stack(
    phase: &PhaseMap,
    schedule: &PhaseShiftSchedule,
    camera: &CameraModel,
    period: f64,
    kind: FringeKind,
) -> Result<FringeStack> {
    camera.validate()?;
    if !(period > 0.0) {
        return Err(Error::invalid("fringe period must be positive"));
    }
    if phase.valid_count() != phase.values.len() {
        return Err(Error::invalid(
            "phase must be valid everywhere for synthesis",
        ));
    }
    let (w, h) = (phase.width(), phase.height());
    let amp = camera.scale * 127.5;
    let offset = kind.step_offset();

    let frames: Vec<Raster<f64>> = schedule
        .steps()
        .iter()
        .map(|&delta| {
            let mut frame = Raster::filled(w, h, 0.0f64);
            frame
                .as_mut_slice()
                .par_chunks_mut(w)
                .enumerate()
                .for_each(|(row, out)| {
                    for (col, v) in out.iter_mut().enumerate() {
                        let carrier = 2.0 * PI * col as f64 / period;
                        let phi = *phase.values.get(col, row);
                        *v = amp * (1.0 + (carrier + phi + delta + offset).cos());
                    }
                });
            frame
        })
        .collect();

    let saturated = vec![Raster::filled(w, h, false); frames.len()];
    Ok(FringeStack {
        frames,
        saturated,
        bit_depth: 8,
        saturation_level: camera.saturation_level,
        kind,
        schedule: schedule.clone(),
    })
}

/// Clamps every intensity to `[0, saturation_level]` without quantizing,
/// recording which samples reached the level.
///
/// This is the sensor ceiling alone: simulation studies score the solvers on
/// these full-precision clipped stacks, with quantization left to
/// [`clip_quantize`] (and the 8-bit file writers) so that rounding noise
/// never masks the clipping effects under study.
pub fn saturate(stack: &FringeStack, camera: &CameraModel) -> Result<FringeStack> {
    camera.validate()?;
    let level = camera.saturation_level;
    let mut out = stack.clone();
    for (frame, mask) in out.frames.iter_mut().zip(out.saturated.iter_mut()) {
        for (v, sat) in frame
            .as_mut_slice()
            .iter_mut()
            .zip(mask.as_mut_slice().iter_mut())
        {
            *sat = *v >= level;
            *v = v.clamp(0.0, level);
        }
    }
    out.saturation_level = level;
    Ok(out)
}

/// Rounds every intensity to the nearest integer and clamps it to
/// `[0, saturation_level]`, recording which samples reached the level.
///
/// The recorded flags make saturation detection exact for synthetic data;
/// ingested captures use a threshold instead (see the retrieval module).
/// Note that rounding alone can reach the level, so at scale factors just
/// below 1 a boundary pixel may be flagged even though nothing clipped.
pub fn clip_quantize(stack: &FringeStack, camera: &CameraModel) -> Result<FringeStack> {
    camera.validate()?;
    let level = camera.saturation_level;
    let mut out = stack.clone();
    for (frame, mask) in out.frames.iter_mut().zip(out.saturated.iter_mut()) {
        for (v, sat) in frame
            .as_mut_slice()
            .iter_mut()
            .zip(mask.as_mut_slice().iter_mut())
        {
            let rounded = v.round();
            *sat = rounded >= level;
            *v = rounded.clamp(0.0, level);
        }
    }
    out.saturation_level = level;
    Ok(out)
}

/// Adds independent Gaussian noise to every sample of every frame.
///
/// Deterministic for a fixed `rng_seed`. Meant to run on real-valued frames
/// before [`clip_quantize`], modelling sensor noise entering a clipping ADC.
pub fn add_noise(stack: &FringeStack, camera: &CameraModel) -> Result<FringeStack> {
    camera.validate()?;
    if camera.noise_variance == 0.0 && camera.noise_mean == 0.0 {
        return Ok(stack.clone());
    }
    let normal = Normal::new(camera.noise_mean, camera.noise_variance.sqrt())
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(camera.rng_seed);
    let mut out = stack.clone();
    for frame in &mut out.frames {
        for v in frame.as_mut_slice() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}
