//! Quality-guided path unwrapping.
//!
//! Unwrapping floods outward from the most trustworthy pixel, always
//! extending the frontier at its highest-quality point, so that the
//! error-prone low-quality regions are visited last and cannot poison the
//! rest of the map. Each 4-connected valid component is unwrapped
//! independently and is therefore consistent only up to its own 2*pi*k
//! offset.

use crate::error::{Error, Result};
use crate::raster::{PhaseMap, Raster};
use crate::retrieve::RetrievalResult;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

/// Per-pixel unwrapping priority; higher scores are visited earlier.
#[derive(Debug, Clone)]
pub struct QualityMap {
    pub scores: Raster<f64>,
}

const QUALITY_EPS: f64 = 1e-6;

/// Scores each valid pixel as modulation over (eps + variance of the raw
/// differences of the wrapped phase inside its 3x3 window).
///
/// Raw (not re-wrapped) differences are deliberate: a 2*pi discontinuity line
/// produces near-tau jumps, blowing up the local variance and pushing those
/// pixels to the back of the flood order. Invalid pixels get the minimum
/// score and are never visited anyway.
pub fn quality_map(wrapped: &PhaseMap, modulation: Option<&Raster<f64>>) -> Result<QualityMap> {
    if let Some(m) = modulation {
        if !m.same_dims(&wrapped.values) {
            return Err(Error::DimensionMismatch(
                "modulation raster does not match the wrapped map".into(),
            ));
        }
    }
    if wrapped.valid_count() == 0 {
        return Err(Error::EmptyDomain(
            "cannot score an all-invalid phase map".into(),
        ));
    }
    let (w, h) = (wrapped.width(), wrapped.height());
    let mut scores = Raster::filled(w, h, f64::NEG_INFINITY);
    for y in 0..h {
        for x in 0..w {
            if !*wrapped.mask.get(x, y) {
                continue;
            }
            let mut sum = 0.0f64;
            let mut sumsq = 0.0f64;
            let mut n = 0usize;
            let x0 = x.saturating_sub(1);
            let y0 = y.saturating_sub(1);
            let x1 = (x + 1).min(w - 1);
            let y1 = (y + 1).min(h - 1);
            for wy in y0..=y1 {
                for wx in x0..=x1 {
                    if !*wrapped.mask.get(wx, wy) {
                        continue;
                    }
                    // Horizontal and vertical forward differences that stay
                    // inside the window.
                    if wx + 1 <= x1 && *wrapped.mask.get(wx + 1, wy) {
                        let d = wrapped.values.get(wx + 1, wy) - wrapped.values.get(wx, wy);
                        sum += d;
                        sumsq += d * d;
                        n += 1;
                    }
                    if wy + 1 <= y1 && *wrapped.mask.get(wx, wy + 1) {
                        let d = wrapped.values.get(wx, wy + 1) - wrapped.values.get(wx, wy);
                        sum += d;
                        sumsq += d * d;
                        n += 1;
                    }
                }
            }
            let variance = if n > 0 {
                let mean = sum / n as f64;
                (sumsq / n as f64 - mean * mean).max(0.0)
            } else {
                0.0
            };
            let b = modulation.map_or(1.0, |m| *m.get(x, y));
            scores.set(x, y, b / (QUALITY_EPS + variance));
        }
    }
    Ok(QualityMap { scores })
}

/// Convenience wrapper scoring a retrieval result by its own modulation map.
pub fn quality_from_retrieval(result: &RetrievalResult) -> Result<QualityMap> {
    quality_map(&result.wrapped, Some(&result.modulation))
}

/// Frontier entry: max-heap on quality, ties broken toward the smaller
/// pixel index so the flood order is reproducible.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    quality: f64,
    index: usize,
    anchor_value: f64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.quality == other.quality && self.index == other.index
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.quality
            .total_cmp(&other.quality)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Unwraps a phase map by quality-guided flooding.
///
/// Every output value equals its wrapped input plus an integer multiple of
/// 2*pi, chosen to sit nearest the already-unwrapped neighbor that first
/// reached it. Disconnected valid regions are processed independently.
pub fn unwrap_quality_guided(wrapped: &PhaseMap, quality: &QualityMap) -> Result<PhaseMap> {
    if !quality.scores.same_dims(&wrapped.values) {
        return Err(Error::DimensionMismatch(
            "quality map does not match the wrapped map".into(),
        ));
    }
    let (w, h) = (wrapped.width(), wrapped.height());
    let npix = w * h;
    let mask = wrapped.mask.as_slice();
    let values = wrapped.values.as_slice();
    let scores = quality.scores.as_slice();

    let mut out = vec![f64::NAN; npix];
    let mut done = vec![false; npix];

    // Component seeds in quality order, index ascending on ties.
    let mut seeds: Vec<usize> = (0..npix).filter(|&i| mask[i]).collect();
    seeds.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();
    let neighbors = |i: usize| {
        let (x, y) = (i % w, i / w);
        let mut out = [usize::MAX; 4];
        let mut n = 0;
        if x > 0 {
            out[n] = i - 1;
            n += 1;
        }
        if x + 1 < w {
            out[n] = i + 1;
            n += 1;
        }
        if y > 0 {
            out[n] = i - w;
            n += 1;
        }
        if y + 1 < h {
            out[n] = i + w;
            n += 1;
        }
        (out, n)
    };

    for &seed in &seeds {
        if done[seed] {
            continue;
        }
        // New connected component: anchor it at its own wrapped value.
        done[seed] = true;
        out[seed] = values[seed];
        let (nbrs, n) = neighbors(seed);
        for &nb in &nbrs[..n] {
            if !done[nb] && mask[nb] {
                heap.push(Candidate {
                    quality: scores[nb],
                    index: nb,
                    anchor_value: out[seed],
                });
            }
        }
        while let Some(c) = heap.pop() {
            if done[c.index] {
                continue;
            }
            done[c.index] = true;
            let turns = ((c.anchor_value - values[c.index]) / TAU).round();
            out[c.index] = values[c.index] + TAU * turns;
            let (nbrs, n) = neighbors(c.index);
            for &nb in &nbrs[..n] {
                if !done[nb] && mask[nb] {
                    heap.push(Candidate {
                        quality: scores[nb],
                        index: nb,
                        anchor_value: out[c.index],
                    });
                }
            }
        }
    }

    PhaseMap::new(
        Raster::from_vec(w, h, out)?,
        wrapped.mask.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fringe::peaks_phase;
    use crate::solver::wrap_phase;
    use std::f64::consts::PI;

    fn wrap_map(phase: &PhaseMap) -> PhaseMap {
        let wrapped: Vec<f64> = phase
            .values
            .as_slice()
            .iter()
            .map(|&v| wrap_phase(v))
            .collect();
        PhaseMap::new(
            Raster::from_vec(phase.width(), phase.height(), wrapped).unwrap(),
            phase.mask.clone(),
        )
        .unwrap()
    }

    #[test]
    fn constant_map_has_uniform_scores_and_unwraps_to_itself() {
        let phase = PhaseMap::all_valid(Raster::filled(16, 16, 1.25)).unwrap();
        let quality = quality_map(&phase, None).unwrap();
        let first = *quality.scores.get(0, 0);
        assert!(quality
            .scores
            .as_slice()
            .iter()
            .all(|&s| (s - first).abs() < 1e-12));
        let out = unwrap_quality_guided(&phase, &quality).unwrap();
        assert!(out
            .values
            .as_slice()
            .iter()
            .all(|&v| (v - 1.25).abs() < 1e-12));
    }

    #[test]
    fn zero_modulation_pixel_scores_lowest_among_valid() {
        let phase = PhaseMap::all_valid(Raster::filled(8, 8, 0.0)).unwrap();
        let mut modulation = Raster::filled(8, 8, 50.0);
        modulation.set(3, 3, 0.0);
        let quality = quality_map(&phase, Some(&modulation)).unwrap();
        let min = quality
            .scores
            .as_slice()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(*quality.scores.get(3, 3), min);
        assert_eq!(min, 0.0);
    }

    #[test]
    fn wrap_discontinuities_score_lowest() {
        // A steady ramp wraps every few columns; pixels neighboring the
        // jump must score below pixels well inside a fringe.
        let w = 64;
        let mut values = Vec::with_capacity(w * 8);
        for _y in 0..8 {
            for x in 0..w {
                values.push(wrap_phase(0.4 * x as f64));
            }
        }
        let phase = PhaseMap::all_valid(Raster::from_vec(w, 8, values).unwrap()).unwrap();
        let quality = quality_map(&phase, None).unwrap();
        // The ramp crosses pi between x=7 (2.8) and x=8 (3.2), where the
        // wrapped values jump by nearly a full turn.
        let near_jump = *quality.scores.get(8, 4);
        let smooth = *quality.scores.get(16, 4);
        assert!(
            near_jump < smooth / 10.0,
            "jump {near_jump} vs smooth {smooth}"
        );
    }

    #[test]
    fn all_invalid_map_is_an_empty_domain() {
        let values = Raster::filled(4, 4, 0.0);
        let mask = Raster::filled(4, 4, false);
        let phase = PhaseMap::new(values, mask).unwrap();
        assert!(matches!(
            quality_map(&phase, None),
            Err(Error::EmptyDomain(_))
        ));
    }

    #[test]
    fn round_trip_restores_peaks_up_to_one_offset() {
        let truth = peaks_phase(128, 128, 3.0).unwrap();
        let wrapped = wrap_map(&truth);
        let quality = quality_map(&wrapped, None).unwrap();
        let out = unwrap_quality_guided(&wrapped, &quality).unwrap();
        // The difference to truth must be one shared multiple of tau.
        let d0 = out.values.as_slice()[0] - truth.values.as_slice()[0];
        let turns = (d0 / TAU).round();
        for (o, t) in out.values.as_slice().iter().zip(truth.values.as_slice()) {
            assert!((o - t - TAU * turns).abs() < 1e-10);
        }
    }

    #[test]
    fn output_minus_input_is_whole_turns() {
        let truth = peaks_phase(64, 64, 3.0).unwrap();
        let wrapped = wrap_map(&truth);
        let quality = quality_map(&wrapped, None).unwrap();
        let out = unwrap_quality_guided(&wrapped, &quality).unwrap();
        for (o, wv) in out.values.as_slice().iter().zip(wrapped.values.as_slice()) {
            let turns = (o - wv) / TAU;
            assert!((turns - turns.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn disconnected_components_are_each_consistent() {
        // Two halves separated by an invalid column; give the right half an
        // extra tau so a bridge would be visible. The grid is fine enough to
        // keep neighbor steps below half a turn.
        let truth = peaks_phase(33, 64, 3.0).unwrap();
        let (w, h) = (truth.width(), truth.height());
        let mut values = truth.values.clone();
        let mut mask = Raster::filled(w, h, true);
        for y in 0..h {
            mask.set(16, y, false);
            for x in 17..w {
                let v = *values.get(x, y) + TAU;
                values.set(x, y, v);
            }
        }
        let shifted = PhaseMap::new(values, mask).unwrap();
        let wrapped = wrap_map(&shifted);
        let quality = quality_map(&wrapped, None).unwrap();
        let out = unwrap_quality_guided(&wrapped, &quality).unwrap();
        // Each side must be internally offset-consistent against truth.
        for range in [0usize..16, 17..33] {
            let x0 = range.start;
            let d0 = out.values.get(x0, 0) - truth.values.get(x0, 0);
            let turns = (d0 / TAU).round();
            for y in 0..h {
                for x in range.clone() {
                    let d = out.values.get(x, y) - truth.values.get(x, y);
                    assert!((d - TAU * turns).abs() < 1e-10);
                }
            }
        }
        // Invalid pixels stay invalid.
        assert!(!*out.mask.get(16, 3));
    }

    #[test]
    fn order_preserving_quality_changes_do_not_change_output() {
        let truth = peaks_phase(48, 48, 3.0).unwrap();
        let wrapped = wrap_map(&truth);
        let quality = quality_map(&wrapped, None).unwrap();
        let out_a = unwrap_quality_guided(&wrapped, &quality).unwrap();

        // A strictly monotone transform preserves the flood order exactly.
        let transformed: Vec<f64> = quality
            .scores
            .as_slice()
            .iter()
            .map(|&s| 3.0 * s + 1.0)
            .collect();
        let quality_b = QualityMap {
            scores: Raster::from_vec(48, 48, transformed).unwrap(),
        };
        let out_b = unwrap_quality_guided(&wrapped, &quality_b).unwrap();
        assert_eq!(out_a.values.as_slice(), out_b.values.as_slice());
    }

    #[test]
    fn smooth_phase_below_half_turn_gradient_round_trips() {
        // A tilted plane with |step| < pi between neighbors.
        let (w, h) = (40, 30);
        let mut values = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                values.push(0.9 * x as f64 - 0.35 * y as f64);
            }
        }
        let truth = PhaseMap::all_valid(Raster::from_vec(w, h, values).unwrap()).unwrap();
        let wrapped = wrap_map(&truth);
        let quality = quality_map(&wrapped, None).unwrap();
        let out = unwrap_quality_guided(&wrapped, &quality).unwrap();
        let d0 = out.values.as_slice()[0] - truth.values.as_slice()[0];
        let turns = (d0 / TAU).round();
        for (o, t) in out.values.as_slice().iter().zip(truth.values.as_slice()) {
            assert!((o - t - TAU * turns).abs() < 1e-9);
        }
        // And the wrapped input was genuinely wrapped somewhere.
        assert!(truth
            .values
            .as_slice()
            .iter()
            .any(|&v| v > PI || v < -PI));
    }
}
