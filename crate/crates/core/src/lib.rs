//! Staged, human-steerable restoration of old photographs.
//!
//! The crate is organised bottom-up:
//!
//! - [`imaging`]: 8-bit rasters, colour conversion, filters, resampling, noise.
//! - [`degrade`]: synthetic old-photo tiers (gray, blur/downscale, crack, noise)
//!   with ground-truth crack masks and replayable manifests.
//! - [`stages`]: the four restoration stages, classical reference backends and
//!   the file-protocol adapter for external model programs.
//! - [`pipeline`]: presets, the preview/commit/rollback session state machine,
//!   on-disk persistence and transcripts, and the automatic mode.
//! - [`eval`]: PSNR/SSIM scoring, corpus evaluation and preference ballots.

pub mod degrade;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod pipeline;
pub mod stages;

pub use degrade::{DegradationRecipe, MaskBuffer, TierSet};
pub use error::{Error, Result};
pub use imaging::{ImageBuffer, SeededRng};
pub use pipeline::{PipelinePreset, RestorationSession};
pub use stages::{BackendDescriptor, BackendRegistry, Stage, StageParams, StageRunner};


