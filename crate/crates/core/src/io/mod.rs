//! File formats and stack ingestion.
//!
//! Everything on disk is deliberately primitive: binary graymaps (P5) for
//! 8-bit frames, portable float maps (Pf) for real-valued images,
//! comma-separated text for tables, and `key = value` sidecars for
//! metadata. Each format is parseable from any language without extra
//! dependencies and every writer is byte-deterministic.

pub mod manifest;
pub mod maps;
pub mod pfm;
pub mod pgm;
pub mod sidecar;

pub use manifest::{load_stack, StackManifest};
pub use maps::{load_maps, load_phase_map, save_maps, save_phase_map};
pub use pfm::{read_pfm, write_pfm};
pub use pgm::{read_pgm, write_pgm};
