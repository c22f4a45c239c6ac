//! The four restoration stages, their classical reference backends, and the
//! file-protocol adapter that hands a stage to an external model program.

mod colorize;
mod denoise;
mod external;
mod face;
mod inpaint;
mod params;
mod registry;
mod runner;

pub use colorize::{colorize_reference, ColorizeMode, SEPIA_MATRIX};
pub use denoise::{auto_steps, denoise_reference, estimate_noise_sigma, DenoiseSettings};
pub use external::{parse_params_file, render_params_file, run_external_backend, PARAMS_FILE};
pub use face::face_restore_reference;
pub use inpaint::inpaint_reference;
pub use params::{Stage, StageParams};
pub use registry::{
    BackendDescriptor, BackendImpl, BackendRegistry, BackendView, ReferenceAlgorithm,
};
pub use runner::{StageRunner, DEFAULT_EXTERNAL_TIMEOUT};
