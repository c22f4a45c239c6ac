//! Deterministic 8-bit raster primitives shared by every other module.
//!
//! All operations are pure: the same inputs (including the RNG seed) give
//! bit-identical outputs, and borders are always handled by edge replication.

mod buffer;
mod color;
mod filter;
mod noise;
mod resize;
mod rng;

pub use buffer::ImageBuffer;
pub use color::{gray_to_rgb, luma, to_grayscale};
pub use filter::{apply_blur, bilateral_filter, gaussian_blur, gaussian_kernel, median_filter, Blur};
pub use noise::add_gaussian_noise;
pub use resize::{resize, resize_to, ResizeMethod};
pub use rng::{derive_seed, SeededRng};

pub(crate) use filter::gaussian_blur_planes;

#[inline]
pub(crate) fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Index into a row-major buffer with edge replication.
#[inline]
pub(crate) fn clamp_coord(v: i64, len: u32) -> usize {
    v.clamp(0, len as i64 - 1) as usize
}
