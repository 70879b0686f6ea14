//! Fringe-projection phase measurement with saturation-tolerant retrieval.
//!
//! The pipeline stages are:
//!
//! 1. **fringe** – synthetic phase scenes, complementary (regular + inverted)
//!    phase-shifted fringe stacks, and the clipping/quantizing/noisy camera
//!    model.
//! 2. **solver** – the per-pixel generalized least-squares phase solve for
//!    arbitrary known phase steps, with a brute-force reference solver.
//! 3. **retrieve** – whole-image strategies: conventional fixed-schedule,
//!    complementary replacement, and the generalized all-unsaturated-samples
//!    method.
//! 4. **unwrap** – quality-guided path unwrapping of wrapped maps.
//! 5. **metrics** – RMSE, residual row profiles, and the scripted saturation
//!    sweep.
//! 6. **io** – graymap/float-map persistence, stack manifests, and sidecars.

pub mod error;
pub mod fringe;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod retrieve;
pub mod solver;
pub mod unwrap;

pub use error::{Error, Result};
pub use fringe::{
    add_noise, clip_quantize, peaks_phase, saturate, synth_stack, CameraModel, FringeKind,
    FringeStack, PhaseShiftSchedule,
};
pub use metrics::{
    residual_row, rmse, rmse_over, run_table1, wrapped_truth_with_carrier, ExperimentConfig,
    Method, NoiseConfig, RmseMode, RmseTable,
};
pub use raster::{PhaseMap, Raster};
pub use retrieve::{
    build_sample_set, distinct_usable_step_counts, retrieve_conventional, retrieve_jiang,
    retrieve_proposed, InvalidReason, RetrievalResult, SaturationDetect, SaturationMask,
};
pub use solver::{
    accumulate_sums, brute_force_oracle, phase_closed_form, solve_pixel, wrap_phase,
    PhaseSolution, PixelSampleSet, Sample, TrigSums,
};
pub use unwrap::{quality_from_retrieval, quality_map, unwrap_quality_guided, QualityMap};
