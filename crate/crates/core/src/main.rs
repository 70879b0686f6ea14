//! Command-line driver for the fringe-projection pipeline.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use fringeproj::io::sidecar::write_keyvalues;
use fringeproj::io::{
    load_maps, load_stack, read_pfm, save_maps, save_phase_map, write_pfm, write_pgm,
    StackManifest,
};
use fringeproj::fringe::saturate;
use fringeproj::retrieve::DEFAULT_INGEST_THRESHOLD;
use fringeproj::{
    add_noise, peaks_phase, quality_from_retrieval, residual_row, retrieve_conventional,
    retrieve_jiang, retrieve_proposed, rmse_over, run_table1, synth_stack, unwrap_quality_guided,
    wrapped_truth_with_carrier, CameraModel, ExperimentConfig, FringeKind, FringeStack, Method,
    NoiseConfig, PhaseMap, PhaseShiftSchedule, Raster, RetrievalResult, RmseMode,
    SaturationDetect,
};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "fringeproj",
    about = "Synthesize, retrieve, unwrap, and score fringe-projection phase measurements",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// Scene width in pixels
    #[arg(long, default_value_t = 512)]
    width: usize,

    /// Scene height in pixels
    #[arg(long, default_value_t = 512)]
    height: usize,

    /// Half-width of the surface coordinate range
    #[arg(long, default_value_t = 3.0)]
    extent: f64,

    /// Fringe period in pixels
    #[arg(long, default_value_t = 32.0)]
    period: f64,

    /// Comma-separated phase steps in radians (default: three steps of 2*pi/3)
    #[arg(long)]
    schedule: Option<String>,

    /// Amplitude scale factor; above 1 the brightest pixels clip
    #[arg(long, default_value_t = 1.0)]
    scale: f64,

    /// Mean of the additive Gaussian noise
    #[arg(long, default_value_t = 0.0)]
    noise_mean: f64,

    /// Variance of the additive Gaussian noise (0 disables noise)
    #[arg(long, default_value_t = 0.0)]
    noise_variance: f64,

    /// Seed for the noise generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SceneArgs {
    fn schedule(&self) -> anyhow::Result<PhaseShiftSchedule> {
        match &self.schedule {
            None => Ok(PhaseShiftSchedule::three_step()),
            Some(text) => {
                let steps = parse_float_list(text).context("parsing --schedule")?;
                Ok(PhaseShiftSchedule::new(steps)?)
            }
        }
    }

    fn camera(&self, seed_offset: u64) -> anyhow::Result<CameraModel> {
        Ok(CameraModel::new(self.scale)?.with_noise(
            self.noise_mean,
            self.noise_variance,
            self.seed.wrapping_add(seed_offset),
        )?)
    }

    fn noisy(&self) -> bool {
        self.noise_variance > 0.0 || self.noise_mean != 0.0
    }

    fn meta(&self, schedule: &PhaseShiftSchedule) -> Vec<(String, String)> {
        vec![
            ("width".into(), self.width.to_string()),
            ("height".into(), self.height.to_string()),
            ("extent".into(), self.extent.to_string()),
            ("period".into(), self.period.to_string()),
            ("schedule".into(), schedule_string(schedule)),
            ("scale".into(), self.scale.to_string()),
            ("noise_mean".into(), self.noise_mean.to_string()),
            ("noise_variance".into(), self.noise_variance.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scene and write clipped regular + inverted stacks
    Synth {
        #[command(flatten)]
        scene: SceneArgs,

        /// Output directory
        #[arg(long)]
        out: PathBuf,

        /// Saturation threshold recorded in the manifest for later retrieval
        #[arg(long, default_value_t = DEFAULT_INGEST_THRESHOLD)]
        threshold: f64,
    },

    /// Run one retrieval method over stacks named by a manifest
    Retrieve {
        /// Stack manifest file
        #[arg(long)]
        manifest: PathBuf,

        /// Retrieval method: conventional | jiang | proposed
        #[arg(long)]
        method: String,

        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },

    /// Unwrap a retrieval result directory
    Unwrap {
        /// Directory written by `retrieve` (or `pipeline`)
        #[arg(long)]
        maps: PathBuf,

        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },

    /// Compare an estimate against a truth map
    Evaluate {
        /// Estimate float map
        #[arg(long)]
        estimate: PathBuf,

        /// Truth float map
        #[arg(long)]
        truth: PathBuf,

        /// Optional validity mask (nonzero bytes mark valid pixels)
        #[arg(long)]
        mask: Option<PathBuf>,

        /// Optional reason raster (zero bytes mark valid pixels)
        #[arg(long)]
        reasons: Option<PathBuf>,

        /// Difference handling: wrapped | raw | offset-2pik | offset-constant
        #[arg(long, default_value = "wrapped")]
        mode: String,

        /// Also emit the residual profile of this row
        #[arg(long)]
        row: Option<usize>,

        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },

    /// Run the saturation sweep and write the RMSE table
    Table1 {
        #[command(flatten)]
        scene: SceneArgs,

        /// Comma-separated scale factors to sweep
        #[arg(long, default_value = "1.0,1.2,1.4,1.6,1.8,2.0,2.2")]
        scales: String,

        /// Comma-separated methods to run
        #[arg(long, default_value = "conventional,jiang,proposed")]
        methods: String,

        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },

    /// Chain synth -> retrieve -> unwrap -> evaluate in one run
    Pipeline {
        #[command(flatten)]
        scene: SceneArgs,

        /// Retrieval method: conventional | jiang | proposed
        #[arg(long, default_value = "proposed")]
        method: String,

        /// Row for the residual profile (default: middle row)
        #[arg(long)]
        row: Option<usize>,

        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_float_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid number '{t}'"))
        })
        .collect()
}

fn schedule_string(schedule: &PhaseShiftSchedule) -> String {
    schedule
        .steps()
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Synthesizes both stacks for a scene, applying noise before the clipping
/// sensor ceiling; the inverted stack draws from an offset noise stream.
/// Frames stay real-valued in memory; the graymap writer quantizes on disk.
fn synthesize_pair(
    scene: &SceneArgs,
    phase: &PhaseMap,
    schedule: &PhaseShiftSchedule,
) -> anyhow::Result<(FringeStack, FringeStack)> {
    let camera = scene.camera(0)?;
    let mut regular = synth_stack(phase, schedule, &camera, scene.period, FringeKind::Regular)?;
    let mut inverted = synth_stack(phase, schedule, &camera, scene.period, FringeKind::Inverted)?;
    if scene.noisy() {
        let inv_camera = scene.camera(1)?;
        regular = add_noise(&regular, &camera)?;
        inverted = add_noise(&inverted, &inv_camera)?;
    }
    Ok((saturate(&regular, &camera)?, saturate(&inverted, &camera)?))
}

fn write_stacks(
    dir: &Path,
    regular: &FringeStack,
    inverted: &FringeStack,
    schedule: &PhaseShiftSchedule,
    threshold: f64,
) -> anyhow::Result<StackManifest> {
    let mut manifest = StackManifest {
        regular_frames: Vec::new(),
        inverted_frames: Vec::new(),
        schedule: schedule.clone(),
        bit_depth: 8,
        saturation_threshold: threshold,
        truth: Some(dir.join("truth.pfm")),
    };
    for (stack, prefix, list) in [
        (regular, "reg", &mut manifest.regular_frames),
        (inverted, "inv", &mut manifest.inverted_frames),
    ] {
        for (k, frame) in stack.frames.iter().enumerate() {
            let path = dir.join(format!("{prefix}_{k}.pgm"));
            write_pgm(&path, frame, 255)?;
            list.push(path);
        }
    }
    manifest.write(&dir.join("manifest.txt"))?;
    Ok(manifest)
}

fn run_retrieval(
    method: Method,
    regular: &FringeStack,
    inverted: &FringeStack,
) -> anyhow::Result<RetrievalResult> {
    Ok(match method {
        Method::Conventional => retrieve_conventional(regular)?,
        Method::Jiang => retrieve_jiang(regular, inverted, SaturationDetect::Recorded)?,
        Method::Proposed => retrieve_proposed(regular, inverted, SaturationDetect::Recorded)?,
    })
}

fn write_residual_profile(path: &Path, residuals: &[f64]) -> anyhow::Result<()> {
    let mut text = String::from("# column residual_rad\n");
    for (col, r) in residuals.iter().enumerate() {
        text.push_str(&format!("{col} {r:e}\n"));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_synth(scene: SceneArgs, out: PathBuf, threshold: f64) -> anyhow::Result<()> {
    ensure_dir(&out)?;
    let schedule = scene.schedule()?;
    let phase = peaks_phase(scene.width, scene.height, scene.extent)?;
    let (regular, inverted) = synthesize_pair(&scene, &phase, &schedule)?;
    write_stacks(&out, &regular, &inverted, &schedule, threshold)?;
    write_pfm(&out.join("surface.pfm"), &phase.values)?;
    let truth = wrapped_truth_with_carrier(&phase, scene.period)?;
    write_pfm(&out.join("truth.pfm"), &truth.values)?;
    let mut meta = vec![("command".to_string(), "synth".to_string())];
    meta.extend(scene.meta(&schedule));
    meta.push(("threshold".into(), threshold.to_string()));
    write_keyvalues(&out.join("run.meta"), &meta)?;
    println!(
        "wrote {} frames per stack to {}",
        schedule.count(),
        out.display()
    );
    Ok(())
}

fn cmd_retrieve(manifest_path: PathBuf, method: String, out: PathBuf) -> anyhow::Result<()> {
    let method = Method::from_str(&method)?;
    let manifest = StackManifest::read(&manifest_path)?;
    let (regular, inverted) = load_stack(&manifest)?;
    let result = run_retrieval(method, &regular, &inverted)?;
    let meta = vec![
        ("command".to_string(), "retrieve".to_string()),
        ("manifest".to_string(), manifest_path.display().to_string()),
        ("method".to_string(), method.to_string()),
        (
            "threshold".to_string(),
            manifest.saturation_threshold.to_string(),
        ),
        ("schedule".to_string(), schedule_string(&manifest.schedule)),
    ];
    save_maps(&result, &out, &meta)?;
    println!(
        "{}: {} of {} pixels valid",
        method,
        result.valid_count(),
        result.wrapped.values.len()
    );
    Ok(())
}

fn cmd_unwrap(maps: PathBuf, out: PathBuf) -> anyhow::Result<()> {
    let result = load_maps(&maps)?;
    if result.valid_count() == 0 {
        bail!("retrieval result in {} has no valid pixels", maps.display());
    }
    let quality = quality_from_retrieval(&result)?;
    let unwrapped = unwrap_quality_guided(&result.wrapped, &quality)?;
    ensure_dir(&out)?;
    save_phase_map(&unwrapped, &out, "unwrapped")?;
    let meta = vec![
        ("command".to_string(), "unwrap".to_string()),
        ("maps".to_string(), maps.display().to_string()),
        (
            "valid_pixels".to_string(),
            unwrapped.valid_count().to_string(),
        ),
    ];
    write_keyvalues(&out.join("run.meta"), &meta)?;
    println!("unwrapped {} valid pixels", unwrapped.valid_count());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    estimate: PathBuf,
    truth: PathBuf,
    mask: Option<PathBuf>,
    reasons: Option<PathBuf>,
    mode: String,
    row: Option<usize>,
    out: PathBuf,
) -> anyhow::Result<()> {
    let mode = RmseMode::from_str(&mode)?;
    let est_values = read_pfm(&estimate)?;
    let truth_values = read_pfm(&truth)?;
    let (w, h) = (est_values.width(), est_values.height());

    let mut valid = Raster::filled(w, h, true);
    if let Some(mask_path) = &mask {
        let bytes = fringeproj::io::pgm::read_pgm_bytes(mask_path)?;
        let flags: Vec<bool> = bytes.as_slice().iter().map(|&b| b != 0).collect();
        valid = valid.and(&Raster::from_vec(w, h, flags)?)?;
    }
    if let Some(reason_path) = &reasons {
        let bytes = fringeproj::io::pgm::read_pgm_bytes(reason_path)?;
        let flags: Vec<bool> = bytes.as_slice().iter().map(|&b| b == 0).collect();
        valid = valid.and(&Raster::from_vec(w, h, flags)?)?;
    }

    let est = PhaseMap::new(est_values, valid)?;
    let truth_map = PhaseMap::all_valid(truth_values)?;
    let all = Raster::filled(w, h, true);
    let value = rmse_over(&est, &truth_map, &all, mode)?;

    ensure_dir(&out)?;
    let mut lines = vec![
        format!("rmse_rad = {value:e}"),
        format!("mode = {mode}"),
        format!("valid_pixels = {}", est.valid_count()),
    ];
    if let Some(row) = row {
        let residuals = residual_row(&est, &truth_map, row)?;
        write_residual_profile(&out.join("residual_row.txt"), &residuals)?;
        lines.push(format!("residual_row = {row}"));
    }
    fs::write(out.join("rmse.txt"), lines.join("\n") + "\n")
        .with_context(|| "writing rmse.txt")?;
    println!("rmse ({mode}) = {value:e} rad");
    Ok(())
}

fn cmd_table1(scene: SceneArgs, scales: String, methods: String, out: PathBuf) -> anyhow::Result<()> {
    let config = ExperimentConfig {
        width: scene.width,
        height: scene.height,
        extent: scene.extent,
        period: scene.period,
        schedule: scene.schedule()?,
        scale_sweep: parse_float_list(&scales).context("parsing --scales")?,
        noise: if scene.noisy() {
            Some(NoiseConfig {
                mean: scene.noise_mean,
                variance: scene.noise_variance,
            })
        } else {
            None
        },
        methods: methods
            .split(',')
            .map(|m| Method::from_str(m.trim()))
            .collect::<Result<Vec<_>, _>>()?,
        rng_seed: scene.seed,
        rmse_mode: RmseMode::Wrapped,
    };
    let table = run_table1(&config)?;
    ensure_dir(&out)?;
    fs::write(out.join("table.csv"), table.to_csv()).context("writing table.csv")?;
    let mut meta = vec![("command".to_string(), "table1".to_string())];
    meta.extend(
        config
            .echo_lines()
            .iter()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string())),
    );
    write_keyvalues(&out.join("run.meta"), &meta)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn cmd_pipeline(
    scene: SceneArgs,
    method: String,
    row: Option<usize>,
    out: PathBuf,
) -> anyhow::Result<()> {
    let method = Method::from_str(&method)?;
    ensure_dir(&out)?;
    let schedule = scene.schedule()?;
    let phase = peaks_phase(scene.width, scene.height, scene.extent)?;
    let (regular, inverted) = synthesize_pair(&scene, &phase, &schedule)?;
    write_stacks(&out, &regular, &inverted, &schedule, DEFAULT_INGEST_THRESHOLD)?;
    write_pfm(&out.join("surface.pfm"), &phase.values)?;

    // Retrieval, scored against the wrapped carrier-plus-surface truth.
    let result = run_retrieval(method, &regular, &inverted)?;
    if result.valid_count() == 0 {
        bail!("retrieval produced no valid pixels");
    }
    let truth_wrapped = wrapped_truth_with_carrier(&phase, scene.period)?;
    write_pfm(&out.join("truth.pfm"), &truth_wrapped.values)?;
    let mut meta = vec![("command".to_string(), "pipeline".to_string())];
    meta.extend(scene.meta(&schedule));
    meta.push(("method".into(), method.to_string()));
    let maps_dir = out.join("maps");
    save_maps(&result, &maps_dir, &meta)?;
    let all = Raster::filled(scene.width, scene.height, true);
    let wrapped_rmse = rmse_over(&result.wrapped, &truth_wrapped, &all, RmseMode::Wrapped)?;

    // Unwrap and score against the continuous truth up to one shared offset.
    let quality = quality_from_retrieval(&result)?;
    let unwrapped = unwrap_quality_guided(&result.wrapped, &quality)?;
    save_phase_map(&unwrapped, &out, "unwrapped")?;
    let mut continuous = Vec::with_capacity(scene.width * scene.height);
    for y in 0..scene.height {
        for x in 0..scene.width {
            continuous.push(2.0 * PI * x as f64 / scene.period + phase.values.get(x, y));
        }
    }
    let truth_continuous = PhaseMap::all_valid(Raster::from_vec(
        scene.width,
        scene.height,
        continuous,
    )?)?;
    let unwrapped_rmse = rmse_over(&unwrapped, &truth_continuous, &all, RmseMode::OffsetTwoPiK)?;

    let profile_row = row.unwrap_or(scene.height / 2);
    let residuals = residual_row(&result.wrapped, &truth_wrapped, profile_row)?;
    write_residual_profile(&out.join("residual_row.txt"), &residuals)?;

    let report = format!(
        "wrapped_rmse_rad = {wrapped_rmse:e}\nunwrapped_rmse_rad = {unwrapped_rmse:e}\n\
         wrapped_mode = wrapped\nunwrapped_mode = offset-2pik\n\
         residual_row = {profile_row}\nvalid_pixels = {}\n",
        result.valid_count()
    );
    fs::write(out.join("rmse.txt"), report).context("writing rmse.txt")?;
    meta.push(("residual_row".into(), profile_row.to_string()));
    write_keyvalues(&out.join("run.meta"), &meta)?;
    println!(
        "pipeline ({method}): wrapped rmse {wrapped_rmse:e} rad, unwrapped rmse {unwrapped_rmse:e} rad"
    );
    Ok(())
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth {
            scene,
            out,
            threshold,
        } => cmd_synth(scene, out, threshold),
        Command::Retrieve {
            manifest,
            method,
            out,
        } => cmd_retrieve(manifest, method, out),
        Command::Unwrap { maps, out } => cmd_unwrap(maps, out),
        Command::Evaluate {
            estimate,
            truth,
            mask,
            reasons,
            mode,
            row,
            out,
        } => cmd_evaluate(estimate, truth, mask, reasons, mode, row, out),
        Command::Table1 {
            scene,
            scales,
            methods,
            out,
        } => cmd_table1(scene, scales, methods, out),
        Command::Pipeline {
            scene,
            method,
            row,
            out,
        } => cmd_pipeline(scene, method, row, out),
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
