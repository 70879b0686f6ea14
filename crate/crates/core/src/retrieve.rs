//! Whole-image wrapped-phase retrieval strategies.
//!
//! Three strategies are provided:
//!
//! - `retrieve_conventional` solves every pixel from the regular stack alone,
//!   taking clipped intensities at face value.
//! - `retrieve_jiang` repairs saturated regular intensities one-for-one from
//!   their inverted counterparts and then applies the classical three-step
//!   formula; it is only defined for three equal 2*pi/3 steps.
//! - `retrieve_proposed` pools every unsaturated sample from both stacks
//!   (inverted frames contribute their step plus pi) and runs the generalized
//!   least-squares solve on whatever survives, pixel by pixel.
//!
//! Retrieval is embarrassingly parallel across pixels; rows are processed
//! concurrently and written to disjoint output regions.

use crate::error::{Error, Result};
use crate::fringe::{FringeKind, FringeStack};
use crate::raster::{PhaseMap, Raster};
use crate::solver::{solve_pixel, wrap_phase, PixelSampleSet, Sample, SolveFailure};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Per-frame, per-pixel saturation flags for a regular/inverted stack pair.
#[derive(Debug, Clone)]
pub struct SaturationMask {
    pub regular: Vec<Raster<bool>>,
    pub inverted: Vec<Raster<bool>>,
}

/// How saturation flags are obtained from a stack pair.
#[derive(Debug, Clone, Copy)]
pub enum SaturationDetect {
    /// Use the flags recorded by `clip_quantize`; exact for synthetic data.
    Recorded,
    /// Flag intensities at or above a level; real sensors clip softly, so
    /// ingested captures default to 250 of 255.
    Threshold(f64),
}

/// Default detection threshold for ingested 8-bit captures.
pub const DEFAULT_INGEST_THRESHOLD: f64 = 250.0;

impl SaturationDetect {
    pub fn mask(&self, regular: &FringeStack, inverted: &FringeStack) -> Result<SaturationMask> {
        check_stack_pair(regular, inverted)?;
        let build = |stack: &FringeStack| -> Vec<Raster<bool>> {
            match self {
                SaturationDetect::Recorded => stack.saturated.clone(),
                SaturationDetect::Threshold(level) => stack
                    .frames
                    .iter()
                    .map(|frame| {
                        let flags = frame.as_slice().iter().map(|&v| v >= *level).collect();
                        Raster::from_vec(frame.width(), frame.height(), flags)
                            .expect("same length as frame")
                    })
                    .collect(),
            }
        };
        Ok(SaturationMask {
            regular: build(regular),
            inverted: build(inverted),
        })
    }
}

/// Why a pixel produced no phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidReason {
    None,
    TooFewSamples,
    IllConditioned,
    ZeroModulation,
}

impl InvalidReason {
    /// Stable numeric code used in the exported reason raster.
    pub fn code(self) -> u8 {
        match self {
            InvalidReason::None => 0,
            InvalidReason::TooFewSamples => 1,
            InvalidReason::IllConditioned => 2,
            InvalidReason::ZeroModulation => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(InvalidReason::None),
            1 => Some(InvalidReason::TooFewSamples),
            2 => Some(InvalidReason::IllConditioned),
            3 => Some(InvalidReason::ZeroModulation),
            _ => None,
        }
    }
}

/// Wrapped phase plus per-pixel diagnostics from one retrieval run.
#[derive(Debug, Clone)]
pub struct RetrievalResult {
    pub wrapped: PhaseMap,
    pub background: Raster<f64>,
    pub modulation: Raster<f64>,
    pub samples_used: Raster<u32>,
    pub reasons: Raster<InvalidReason>,
}

impl RetrievalResult {
    pub fn width(&self) -> usize {
        self.wrapped.width()
    }

    pub fn height(&self) -> usize {
        self.wrapped.height()
    }

    pub fn valid_mask(&self) -> &Raster<bool> {
        &self.wrapped.mask
    }

    pub fn valid_count(&self) -> usize {
        self.wrapped.valid_count()
    }

    /// Number of pixels carrying each reason, indexed by reason code.
    pub fn reason_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for r in self.reasons.as_slice() {
            counts[r.code() as usize] += 1;
        }
        counts
    }
}

/// Outcome of one pixel's retrieval before assembly into rasters.
#[derive(Debug, Clone, Copy)]
struct PixelOutcome {
    phi: f64,
    background: f64,
    modulation: f64,
    samples_used: u32,
    reason: InvalidReason,
}

impl PixelOutcome {
    fn invalid(reason: InvalidReason, samples_used: u32) -> Self {
        PixelOutcome {
            phi: f64::NAN,
            background: f64::NAN,
            modulation: f64::NAN,
            samples_used,
            reason,
        }
    }
}

fn failure_reason(failure: SolveFailure) -> InvalidReason {
    match failure {
        SolveFailure::IllConditioned => InvalidReason::IllConditioned,
        SolveFailure::ZeroModulation => InvalidReason::ZeroModulation,
    }
}

fn check_stack_pair(regular: &FringeStack, inverted: &FringeStack) -> Result<()> {
    regular.validate()?;
    inverted.validate()?;
    if regular.kind != FringeKind::Regular || inverted.kind != FringeKind::Inverted {
        return Err(Error::invalid(
            "expected one regular and one inverted stack, in that order",
        ));
    }
    if regular.width() != inverted.width() || regular.height() != inverted.height() {
        return Err(Error::DimensionMismatch(
            "regular and inverted stacks differ in size".into(),
        ));
    }
    if regular.schedule != inverted.schedule {
        return Err(Error::invalid(
            "regular and inverted stacks carry different schedules",
        ));
    }
    Ok(())
}

fn check_mask(stack: &FringeStack, layers: &[Raster<bool>]) -> Result<()> {
    if layers.len() != stack.frame_count() {
        return Err(Error::DimensionMismatch(
            "saturation mask layer count differs from frame count".into(),
        ));
    }
    for layer in layers {
        if layer.width() != stack.width() || layer.height() != stack.height() {
            return Err(Error::DimensionMismatch(
                "saturation mask layer size differs from frames".into(),
            ));
        }
    }
    Ok(())
}

/// Collects every unsaturated sample offered at one pixel by the stack pair.
///
/// Regular frames contribute their schedule step; inverted frames contribute
/// the step plus pi. `m_excluded` counts the samples dropped as saturated, so
/// the set always accounts for all 2N offered frames.
pub fn build_sample_set(
    regular: &FringeStack,
    inverted: &FringeStack,
    mask: &SaturationMask,
    x: usize,
    y: usize,
) -> PixelSampleSet {
    let n = regular.frame_count();
    let mut samples = Vec::with_capacity(2 * n);
    let mut excluded = 0usize;
    for (stack, layers) in [(regular, &mask.regular), (inverted, &mask.inverted)] {
        let offset = stack.kind.step_offset();
        for k in 0..n {
            if *layers[k].get(x, y) {
                excluded += 1;
            } else {
                samples.push(Sample {
                    delta: stack.schedule.steps()[k] + offset,
                    intensity: *stack.frames[k].get(x, y),
                });
            }
        }
    }
    PixelSampleSet::new(samples, excluded)
}

fn assemble(width: usize, height: usize, outcomes: Vec<PixelOutcome>) -> Result<RetrievalResult> {
    let mut phi = Vec::with_capacity(outcomes.len());
    let mut mask = Vec::with_capacity(outcomes.len());
    let mut background = Vec::with_capacity(outcomes.len());
    let mut modulation = Vec::with_capacity(outcomes.len());
    let mut samples_used = Vec::with_capacity(outcomes.len());
    let mut reasons = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        phi.push(o.phi);
        mask.push(o.reason == InvalidReason::None);
        background.push(o.background);
        modulation.push(o.modulation);
        samples_used.push(o.samples_used);
        reasons.push(o.reason);
    }
    Ok(RetrievalResult {
        wrapped: PhaseMap::new(
            Raster::from_vec(width, height, phi)?,
            Raster::from_vec(width, height, mask)?,
        )?,
        background: Raster::from_vec(width, height, background)?,
        modulation: Raster::from_vec(width, height, modulation)?,
        samples_used: Raster::from_vec(width, height, samples_used)?,
        reasons: Raster::from_vec(width, height, reasons)?,
    })
}

fn solve_outcome(set: &PixelSampleSet) -> PixelOutcome {
    let k = set.count() as u32;
    if set.count() < 3 {
        return PixelOutcome::invalid(InvalidReason::TooFewSamples, k);
    }
    match solve_pixel(set) {
        Ok(sol) if sol.valid => PixelOutcome {
            phi: sol.phi,
            background: sol.background,
            modulation: sol.modulation(),
            samples_used: k,
            reason: InvalidReason::None,
        },
        Ok(sol) => PixelOutcome::invalid(
            failure_reason(sol.failure.expect("invalid solution has a failure")),
            k,
        ),
        Err(_) => PixelOutcome::invalid(InvalidReason::TooFewSamples, k),
    }
}

/// Generalized retrieval from all unsaturated samples of both stacks.
pub fn retrieve_proposed(
    regular: &FringeStack,
    inverted: &FringeStack,
    detect: SaturationDetect,
) -> Result<RetrievalResult> {
    let mask = detect.mask(regular, inverted)?;
    retrieve_proposed_masked(regular, inverted, &mask)
}

/// Same as [`retrieve_proposed`] with a caller-supplied saturation mask.
pub fn retrieve_proposed_masked(
    regular: &FringeStack,
    inverted: &FringeStack,
    mask: &SaturationMask,
) -> Result<RetrievalResult> {
    check_stack_pair(regular, inverted)?;
    check_mask(regular, &mask.regular)?;
    check_mask(inverted, &mask.inverted)?;
    let (w, h) = (regular.width(), regular.height());
    let outcomes: Vec<PixelOutcome> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let set = build_sample_set(regular, inverted, mask, x, y);
            solve_outcome(&set)
        })
        .collect();
    assemble(w, h, outcomes)
}

/// Fixed-schedule retrieval from the regular stack only, ignoring saturation;
/// clipped intensities enter the solve as stored.
pub fn retrieve_conventional(stack: &FringeStack) -> Result<RetrievalResult> {
    stack.validate()?;
    if stack.frame_count() < 3 {
        return Err(Error::invalid(
            "conventional retrieval needs at least three frames",
        ));
    }
    let (w, h) = (stack.width(), stack.height());
    let steps = stack.schedule.steps().to_vec();
    let offset = stack.kind.step_offset();
    let outcomes: Vec<PixelOutcome> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let samples: Vec<Sample> = steps
                .iter()
                .enumerate()
                .map(|(k, &delta)| Sample {
                    delta: delta + offset,
                    intensity: *stack.frames[k].get(x, y),
                })
                .collect();
            solve_outcome(&PixelSampleSet::new(samples, 0))
        })
        .collect();
    assemble(w, h, outcomes)
}

/// Classical three-step phase for intensities at steps
/// `{first, first + 2pi/3, first + 4pi/3}`.
///
/// Returns `(phi, background, modulation)`; `phi` is wrapped. The numerator
/// and denominator are `3B sin` and `3B cos` of the phase offset by `first`,
/// so the quadrant is unambiguous while the modulation is positive.
fn three_step_phase(i1: f64, i2: f64, i3: f64, first: f64) -> (f64, f64, f64) {
    let num = 3.0f64.sqrt() * (i3 - i2);
    let den = 2.0 * i1 - i2 - i3;
    let modulation = num.hypot(den) / 3.0;
    let background = (i1 + i2 + i3) / 3.0;
    let phi = wrap_phase(num.atan2(den) - first);
    (phi, background, modulation)
}

/// Alternative single-arctangent form for the fully saturated case, written
/// exactly as published elsewhere; kept only so tests can compare it against
/// the pi-shift route and log disagreements.
pub fn all_inverted_closed_form(b1: f64, b2: f64, b3: f64) -> f64 {
    (2.0 * (b1 - b3) / (3.0f64.sqrt() * (b2 - b1 - b3))).atan()
}

fn jiang_pixel(
    reg_i: [f64; 3],
    inv_i: [f64; 3],
    reg_sat: [bool; 3],
    inv_sat: [bool; 3],
    first: f64,
    zero_mod_rel: f64,
) -> PixelOutcome {
    let finish = |i: [f64; 3], extra_offset: f64| -> PixelOutcome {
        let (phi, background, modulation) = three_step_phase(i[0], i[1], i[2], first + extra_offset);
        if modulation <= zero_mod_rel * (1.0 + background.abs()) {
            let mut o = PixelOutcome::invalid(InvalidReason::ZeroModulation, 3);
            o.background = background;
            o
        } else {
            PixelOutcome {
                phi,
                background,
                modulation,
                samples_used: 3,
                reason: InvalidReason::None,
            }
        }
    };

    if reg_sat.iter().all(|&s| !s) {
        return finish(reg_i, 0.0);
    }
    if reg_sat.iter().all(|&s| s) {
        // Every regular intensity clipped: fall back to the inverted triple,
        // whose steps sit pi beyond the regular ones.
        if inv_sat.iter().any(|&s| s) {
            return PixelOutcome::invalid(InvalidReason::TooFewSamples, 0);
        }
        return finish(inv_i, PI);
    }
    // Partial saturation: rebuild each clipped regular value from its
    // inverted counterpart via I + I_inv = 2A, with 2A taken from the
    // frames where both members of the pair survived.
    let mut two_a_sum = 0.0;
    let mut pairs = 0usize;
    for k in 0..3 {
        if !reg_sat[k] && !inv_sat[k] {
            two_a_sum += reg_i[k] + inv_i[k];
            pairs += 1;
        }
    }
    if pairs == 0 {
        return PixelOutcome::invalid(InvalidReason::TooFewSamples, 0);
    }
    let two_a = two_a_sum / pairs as f64;
    let mut rebuilt = reg_i;
    for k in 0..3 {
        if reg_sat[k] {
            if inv_sat[k] {
                return PixelOutcome::invalid(InvalidReason::TooFewSamples, 0);
            }
            rebuilt[k] = two_a - inv_i[k];
        }
    }
    finish(rebuilt, 0.0)
}

/// Complementary-replacement retrieval in its native regime: three equal
/// 2*pi/3 steps.
///
/// Unsaturated pixels use the classical three-step formula directly; pixels
/// with clipped regular samples fall back on their inverted counterparts.
/// Any other schedule is rejected, which is exactly the limitation the
/// generalized method lifts.
pub fn retrieve_jiang(
    regular: &FringeStack,
    inverted: &FringeStack,
    detect: SaturationDetect,
) -> Result<RetrievalResult> {
    check_stack_pair(regular, inverted)?;
    if !regular.schedule.is_equal_three_step(1e-9) {
        return Err(Error::UnsupportedSchedule(
            "complementary replacement needs exactly three steps spaced 2*pi/3".into(),
        ));
    }
    let mask = detect.mask(regular, inverted)?;
    let (w, h) = (regular.width(), regular.height());
    let first = regular.schedule.steps()[0];
    let outcomes: Vec<PixelOutcome> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let pick = |stack: &FringeStack| -> [f64; 3] {
                [
                    *stack.frames[0].get(x, y),
                    *stack.frames[1].get(x, y),
                    *stack.frames[2].get(x, y),
                ]
            };
            let flags = |layers: &[Raster<bool>]| -> [bool; 3] {
                [
                    *layers[0].get(x, y),
                    *layers[1].get(x, y),
                    *layers[2].get(x, y),
                ]
            };
            jiang_pixel(
                pick(regular),
                pick(inverted),
                flags(&mask.regular),
                flags(&mask.inverted),
                first,
                1e-8,
            )
        })
        .collect();
    assemble(w, h, outcomes)
}

/// Counts, per pixel, the distinct effective steps (modulo 2*pi) still
/// usable after saturation removal.
///
/// Equal pi/2 spacing makes inverted frames repeat regular ones modulo 2*pi,
/// so a replacement scheme can run out of distinct steps even though raw
/// samples remain; this diagnostic makes that collapse measurable.
pub fn distinct_usable_step_counts(
    regular: &FringeStack,
    inverted: &FringeStack,
    mask: &SaturationMask,
) -> Result<Raster<u32>> {
    check_stack_pair(regular, inverted)?;
    check_mask(regular, &mask.regular)?;
    check_mask(inverted, &mask.inverted)?;
    let (w, h) = (regular.width(), regular.height());
    let counts: Vec<u32> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let set = build_sample_set(regular, inverted, mask, x, y);
            let mut distinct: Vec<f64> = Vec::with_capacity(set.count());
            for s in &set.samples {
                let step = wrap_phase(s.delta);
                let is_new = distinct
                    .iter()
                    .all(|&seen| wrap_phase(step - seen).abs() > 1e-9);
                if is_new {
                    distinct.push(step);
                }
            }
            distinct.len() as u32
        })
        .collect();
    Raster::from_vec(w, h, counts)
}
