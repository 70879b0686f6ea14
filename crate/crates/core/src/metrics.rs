//! RMSE tables, residual profiles, and the scripted saturation sweep.

use crate::error::{Error, Result};
use crate::fringe::{
    add_noise, peaks_phase, saturate, synth_stack, CameraModel, FringeKind, PhaseShiftSchedule,
};
use crate::raster::{PhaseMap, Raster};
use crate::retrieve::{
    retrieve_conventional, retrieve_jiang, retrieve_proposed, RetrievalResult, SaturationDetect,
};
use crate::solver::wrap_phase;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

/// How the per-pixel difference is reduced before the root mean square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RmseMode {
    /// Each difference wrapped to (-pi, pi]; the default, matching
    /// comparisons of wrapped maps.
    #[default]
    Wrapped,
    /// Raw differences, no offset handling.
    Raw,
    /// One shared multiple of 2*pi (nearest the mean difference) is removed
    /// first; for unwrapped maps whose absolute offset is arbitrary.
    OffsetTwoPiK,
    /// The mean difference is removed first.
    OffsetConstant,
}

impl fmt::Display for RmseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RmseMode::Wrapped => "wrapped",
            RmseMode::Raw => "raw",
            RmseMode::OffsetTwoPiK => "offset-2pik",
            RmseMode::OffsetConstant => "offset-constant",
        };
        f.write_str(name)
    }
}

impl FromStr for RmseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wrapped" => Ok(RmseMode::Wrapped),
            "raw" => Ok(RmseMode::Raw),
            "offset-2pik" => Ok(RmseMode::OffsetTwoPiK),
            "offset-constant" => Ok(RmseMode::OffsetConstant),
            other => Err(Error::invalid(format!("unknown rmse mode '{other}'"))),
        }
    }
}

/// Root-mean-square difference between two phase maps over the pixels where
/// `extra_mask` and both maps' own masks are all valid.
pub fn rmse_over(
    estimate: &PhaseMap,
    truth: &PhaseMap,
    extra_mask: &Raster<bool>,
    mode: RmseMode,
) -> Result<f64> {
    if !estimate.values.same_dims(&truth.values) || !estimate.values.same_dims(extra_mask) {
        return Err(Error::DimensionMismatch(
            "rmse inputs do not share dimensions".into(),
        ));
    }
    let mut diffs = Vec::new();
    for i in 0..estimate.values.len() {
        if estimate.mask.as_slice()[i] && truth.mask.as_slice()[i] && extra_mask.as_slice()[i] {
            diffs.push(estimate.values.as_slice()[i] - truth.values.as_slice()[i]);
        }
    }
    if diffs.is_empty() {
        return Err(Error::EmptyDomain("no valid pixels to compare".into()));
    }
    let offset = match mode {
        RmseMode::Wrapped | RmseMode::Raw => 0.0,
        RmseMode::OffsetTwoPiK => {
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            TAU * (mean / TAU).round()
        }
        RmseMode::OffsetConstant => diffs.iter().sum::<f64>() / diffs.len() as f64,
    };
    let sumsq: f64 = diffs
        .iter()
        .map(|&d| {
            let r = match mode {
                RmseMode::Wrapped => wrap_phase(d),
                _ => d - offset,
            };
            r * r
        })
        .sum();
    Ok((sumsq / diffs.len() as f64).sqrt())
}

/// [`rmse_over`] with no extra mask beyond the maps' own validity.
pub fn rmse(estimate: &PhaseMap, truth: &PhaseMap, mode: RmseMode) -> Result<f64> {
    let all = Raster::filled(estimate.width(), estimate.height(), true);
    rmse_over(estimate, truth, &all, mode)
}

/// Per-column wrapped residual along one row; NaN where either map is
/// invalid.
pub fn residual_row(estimate: &PhaseMap, truth: &PhaseMap, row: usize) -> Result<Vec<f64>> {
    if !estimate.values.same_dims(&truth.values) {
        return Err(Error::DimensionMismatch(
            "residual inputs do not share dimensions".into(),
        ));
    }
    if row >= estimate.height() {
        return Err(Error::invalid(format!(
            "row {row} out of range for height {}",
            estimate.height()
        )));
    }
    Ok((0..estimate.width())
        .map(|x| {
            if *estimate.mask.get(x, row) && *truth.mask.get(x, row) {
                wrap_phase(estimate.values.get(x, row) - truth.values.get(x, row))
            } else {
                f64::NAN
            }
        })
        .collect())
}

/// Ground truth as the solvers see it: the carrier ramp plus the surface
/// phase, wrapped.
pub fn wrapped_truth_with_carrier(phase: &PhaseMap, period: f64) -> Result<PhaseMap> {
    if !(period > 0.0) {
        return Err(Error::invalid("carrier period must be positive"));
    }
    let (w, h) = (phase.width(), phase.height());
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            values.push(wrap_phase(
                2.0 * PI * x as f64 / period + phase.values.get(x, y),
            ));
        }
    }
    PhaseMap::new(Raster::from_vec(w, h, values)?, phase.mask.clone())
}

/// A retrieval strategy selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Conventional,
    Jiang,
    Proposed,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Conventional, Method::Jiang, Method::Proposed];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Conventional => "conventional",
            Method::Jiang => "jiang",
            Method::Proposed => "proposed",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Method::Conventional),
            "jiang" => Ok(Method::Jiang),
            "proposed" => Ok(Method::Proposed),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Additive Gaussian noise settings for a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub mean: f64,
    pub variance: f64,
}

/// Everything needed to reproduce one saturation sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub width: usize,
    pub height: usize,
    pub extent: f64,
    pub period: f64,
    pub schedule: PhaseShiftSchedule,
    pub scale_sweep: Vec<f64>,
    pub noise: Option<NoiseConfig>,
    pub methods: Vec<Method>,
    pub rng_seed: u64,
    pub rmse_mode: RmseMode,
}

impl ExperimentConfig {
    /// Sweep at a single scale with all three methods and no noise.
    pub fn default_sweep() -> Self {
        ExperimentConfig {
            width: 256,
            height: 256,
            extent: 3.0,
            period: 32.0,
            schedule: PhaseShiftSchedule::three_step(),
            scale_sweep: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2],
            noise: None,
            methods: Method::ALL.to_vec(),
            rng_seed: 0,
            rmse_mode: RmseMode::Wrapped,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_sweep.is_empty() {
            return Err(Error::invalid("scale sweep must not be empty"));
        }
        if self.scale_sweep.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("every sweep scale must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method must be selected"));
        }
        if let Some(n) = &self.noise {
            if n.variance < 0.0 {
                return Err(Error::invalid("noise variance must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Key-value lines echoed into every artifact this config produces.
    pub fn echo_lines(&self) -> Vec<String> {
        let steps = self
            .schedule
            .steps()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let scales = self
            .scale_sweep
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let methods = self
            .methods
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut lines = vec![
            format!("width = {}", self.width),
            format!("height = {}", self.height),
            format!("extent = {}", self.extent),
            format!("period = {}", self.period),
            format!("schedule = {steps}"),
            format!("scales = {scales}"),
            format!("methods = {methods}"),
            format!("seed = {}", self.rng_seed),
            format!("rmse_mode = {}", self.rmse_mode),
        ];
        match &self.noise {
            Some(n) => {
                lines.push(format!("noise_mean = {}", n.mean));
                lines.push(format!("noise_variance = {}", n.variance));
            }
            None => lines.push("noise = none".to_string()),
        }
        lines
    }
}

/// RMSE per (method, scale) cell; `None` marks a configuration where the
/// method produced no valid pixels or refused the schedule.
#[derive(Debug, Clone)]
pub struct RmseTable {
    pub config: ExperimentConfig,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl RmseTable {
    pub fn cell(&self, method: Method, scale_index: usize) -> Option<f64> {
        let row = self.config.methods.iter().position(|&m| m == method)?;
        self.cells[row][scale_index]
    }

    /// Comma-separated rendering with the config echoed as comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.config.echo_lines() {
            out.push_str("# ");
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("method");
        for s in &self.config.scale_sweep {
            out.push_str(&format!(",S={s}"));
        }
        out.push('\n');
        for (row, method) in self.config.methods.iter().enumerate() {
            out.push_str(&method.to_string());
            for cell in &self.cells[row] {
                match cell {
                    Some(v) => out.push_str(&format!(",{v:e}")),
                    None => out.push_str(",n/a"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Stacks synthesized for one cell of a sweep, kept so callers can rerun
/// methods without regenerating frames.
pub struct SweepCell {
    pub scale: f64,
    pub regular: crate::fringe::FringeStack,
    pub inverted: crate::fringe::FringeStack,
}

/// Synthesizes the clipped (and optionally noisy) stack pair for one scale.
///
/// Frames are clamped at the sensor ceiling but not quantized, so the sweep
/// measures clipping effects at full precision. Noise seeds derive from the
/// config seed and the cell index so that every cell is independent yet the
/// whole sweep replays bit-exactly.
pub fn synthesize_cell(
    config: &ExperimentConfig,
    phase: &PhaseMap,
    cell_index: usize,
    scale: f64,
) -> Result<SweepCell> {
    let mut camera = CameraModel::new(scale)?;
    if let Some(n) = &config.noise {
        camera = camera.with_noise(
            n.mean,
            n.variance,
            config.rng_seed.wrapping_add(2 * cell_index as u64),
        )?;
    }
    let mut regular = synth_stack(phase, &config.schedule, &camera, config.period, FringeKind::Regular)?;
    let mut inverted = synth_stack(phase, &config.schedule, &camera, config.period, FringeKind::Inverted)?;
    if config.noise.is_some() {
        let inv_camera = CameraModel {
            rng_seed: camera.rng_seed.wrapping_add(1),
            ..camera
        };
        regular = add_noise(&regular, &camera)?;
        inverted = add_noise(&inverted, &inv_camera)?;
    }
    Ok(SweepCell {
        scale,
        regular: saturate(&regular, &camera)?,
        inverted: saturate(&inverted, &camera)?,
    })
}

/// Runs one method over a synthesized cell.
pub fn run_method(method: Method, cell: &SweepCell) -> Result<RetrievalResult> {
    match method {
        Method::Conventional => retrieve_conventional(&cell.regular),
        Method::Jiang => retrieve_jiang(&cell.regular, &cell.inverted, SaturationDetect::Recorded),
        Method::Proposed => {
            retrieve_proposed(&cell.regular, &cell.inverted, SaturationDetect::Recorded)
        }
    }
}

/// Runs the full saturation sweep: for every scale, synthesize the scene,
/// run each selected method, and record its RMSE against the carrier-plus-
/// surface truth over that method's own valid pixels.
pub fn run_table1(config: &ExperimentConfig) -> Result<RmseTable> {
    config.validate()?;
    let phase = peaks_phase(config.width, config.height, config.extent)?;
    let truth = wrapped_truth_with_carrier(&phase, config.period)?;
    let mut cells = vec![Vec::with_capacity(config.scale_sweep.len()); config.methods.len()];
    for (i, &scale) in config.scale_sweep.iter().enumerate() {
        let cell = synthesize_cell(config, &phase, i, scale)?;
        for (row, &method) in config.methods.iter().enumerate() {
            let value = match run_method(method, &cell) {
                Ok(result) => {
                    if result.valid_count() == 0 {
                        None
                    } else {
                        Some(rmse(&result.wrapped, &truth, config.rmse_mode)?)
                    }
                }
                // A method refusing this configuration marks its cell.
                Err(_) => None,
            };
            cells[row].push(value);
        }
    }
    Ok(RmseTable {
        config: config.clone(),
        cells,
    })
}
